#ifndef FIXTURE_KERNEL_H
#define FIXTURE_KERNEL_H

typedef unsigned int u32;
typedef unsigned long size_t;
typedef _Bool bool;
#define true 1
#define false 0
#define NULL ((void *)0)

typedef __builtin_va_list va_list;
#define va_start(ap, last) __builtin_va_start(ap, last)
#define va_arg(ap, type) __builtin_va_arg(ap, type)
#define va_end(ap) __builtin_va_end(ap)

#define noinline __attribute__((noinline))
#define likely(x) __builtin_expect(!!(x), 1)
#define unlikely(x) __builtin_expect(!!(x), 0)

#define KERN_SOH "\001"
#define KERN_EMERG KERN_SOH "0"
#define KERN_CRIT KERN_SOH "2"
#define KERN_ERR KERN_SOH "3"
#define KERN_WARNING KERN_SOH "4"
#define KERN_NOTICE KERN_SOH "5"
#define KERN_INFO KERN_SOH "6"
#define KERN_DEBUG KERN_SOH "7"

#define EPERM 1
#define ENXIO 6
#define ENOMEM 12
#define EBUSY 16
#define ENODEV 19
#define EINVAL 22
#define EEXIST 17
#define ENOSPC 28
#define ENOSYS 38

#define __GFP_ZERO 0x8000u
#define GFP_KERNEL 0xd0u

int printk(const char *fmt, ...);
void warn_slowpath_null(const char *file, int line);
void warn_slowpath_fmt(const char *file, int line, const char *fmt, ...);

#define WARN_ON(condition) ({                                   \
	int __ret_warn_on = !!(condition);                      \
	if (unlikely(__ret_warn_on))                            \
		warn_slowpath_null(__FILE__, __LINE__);         \
	unlikely(__ret_warn_on);                                \
})

#define WARN(condition, format...) ({                           \
	int __ret_warn_on = !!(condition);                      \
	if (unlikely(__ret_warn_on))                            \
		warn_slowpath_fmt(__FILE__, __LINE__, format);  \
	unlikely(__ret_warn_on);                                \
})

#define WARN_ONCE(condition, format...) ({                      \
	static bool __warned;                                   \
	int __ret_warn_once = !!(condition);                    \
	if (unlikely(__ret_warn_once && !__warned)) {           \
		__warned = true;                                \
		WARN(1, format);                                \
	}                                                       \
	unlikely(__ret_warn_once);                              \
})

typedef struct {
	volatile unsigned long owner;
} raw_spinlock_t;

unsigned long _raw_spin_lock_irqsave(raw_spinlock_t *lock);
void _raw_spin_unlock_irqrestore(raw_spinlock_t *lock, unsigned long flags);
void _raw_spin_lock(raw_spinlock_t *lock);
void _raw_spin_unlock(raw_spinlock_t *lock);
void *__kmalloc(size_t size, unsigned int flags);
void kfree(const void *p);
unsigned long long __do_div64(unsigned long long n, unsigned int base);

/* irq core */

#define NR_IRQS 128

typedef unsigned long irq_hw_number_t;
typedef int irqreturn_t;
#define IRQ_NONE 0
#define IRQ_HANDLED 1

struct irq_data;
struct irq_desc;
struct irq_domain;
struct pt_regs;

typedef void (*irq_flow_handler_t)(unsigned int irq, struct irq_desc *desc);
typedef irqreturn_t (*irq_handler_t)(int, void *);

struct irq_chip {
	const char *name;
	unsigned int (*irq_startup)(struct irq_data *data);
	void (*irq_mask)(struct irq_data *data);
	void (*irq_unmask)(struct irq_data *data);
	void (*irq_ack)(struct irq_data *data);
	void (*irq_eoi)(struct irq_data *data);
	void (*irq_mask_ack)(struct irq_data *data);
	int (*irq_set_type)(struct irq_data *data, unsigned int flow_type);
	void (*irq_bus_lock)(struct irq_data *data);
	void (*irq_bus_sync_unlock)(struct irq_data *data);
};

struct irq_data {
	unsigned int irq;
#if !V26
	unsigned long hwirq;
#endif
	unsigned int node;
	unsigned int state_use_accessors;
	struct irq_chip *chip;
#if !V26
	struct irq_domain *domain;
#endif
	void *handler_data;
	void *chip_data;
};

struct irqaction {
	irq_handler_t handler;
	void *dev_id;
	struct irqaction *next;
	int irq;
	unsigned int flags;
	const char *name;
};

struct irq_desc {
	struct irq_data irq_data;
	irq_flow_handler_t handle_irq;
	struct irqaction *action;
	unsigned int status_use_accessors;
	unsigned int istate;
	unsigned int depth;
	unsigned int irq_count;
	unsigned int irqs_unhandled;
	raw_spinlock_t lock;
	const char *name;
};

#define IRQ_TYPE_NONE 0x0
#define IRQ_TYPE_SENSE_MASK 0xf
#define IRQ_LEVEL (1 << 8)
#define IRQ_PER_CPU (1 << 9)
#define IRQ_NOPROBE (1 << 10)
#define IRQ_NOREQUEST (1 << 11)
#define IRQ_NOAUTOEN (1 << 12)
#define IRQ_NO_BALANCING (1 << 13)
#define IRQ_MOVE_PCNTXT (1 << 14)
#define IRQ_NESTED_THREAD (1 << 15)
#define IRQ_NOTHREAD (1 << 16)
#define IRQ_PER_CPU_DEVID (1 << 17)
#define IRQ_IS_POLLED (1 << 18)
#define IRQ_DISABLED (1 << 19)
#define _IRQF_MODIFY_MASK (IRQ_TYPE_SENSE_MASK | IRQ_NOPROBE | IRQ_NOREQUEST | IRQ_NOAUTOEN | \
	IRQ_MOVE_PCNTXT | IRQ_LEVEL | IRQ_NO_BALANCING | IRQ_PER_CPU | IRQ_NESTED_THREAD | \
	IRQ_NOTHREAD | IRQ_PER_CPU_DEVID | IRQ_IS_POLLED)

#define IRQF_VALID (1 << 0)
#define IRQF_PROBE (1 << 1)
#define IRQF_NOAUTOEN (1 << 2)
#define IRQF_TRIGGER_MASK 0x0f
#define IRQF_SHARED 0x80

#define IRQD_TRIGGER_MASK 0xf
#define IRQD_PER_CPU (1 << 11)
#define IRQD_NO_BALANCING (1 << 12)
#define IRQD_LEVEL (1 << 13)
#define IRQD_MOVE_PCNTXT (1 << 15)
#define IRQD_IRQ_DISABLED (1 << 16)
#define IRQD_IRQ_MASKED (1 << 17)
#define IRQD_IRQ_INPROGRESS (1 << 18)

#define IRQS_AUTODETECT 0x1
#define IRQS_SPURIOUS_DISABLED 0x2
#define IRQS_WAITING 0x80
#define IRQS_PENDING 0x200
#define IRQS_REPLAY 0x40
#define IRQS_ONESHOT 0x20

static inline void irqd_set(struct irq_data *d, unsigned int mask)
{
	d->state_use_accessors |= mask;
}

static inline void irqd_clear(struct irq_data *d, unsigned int mask)
{
	d->state_use_accessors &= ~mask;
}

static inline bool irqd_irq_disabled(struct irq_data *d)
{
	return d->state_use_accessors & IRQD_IRQ_DISABLED;
}

static inline bool irqd_irq_masked(struct irq_data *d)
{
	return d->state_use_accessors & IRQD_IRQ_MASKED;
}

static inline bool irqd_irq_inprogress(struct irq_data *d)
{
	return d->state_use_accessors & IRQD_IRQ_INPROGRESS;
}

static inline void irq_state_set_disabled(struct irq_desc *desc)
{
	irqd_set(&desc->irq_data, IRQD_IRQ_DISABLED);
}

static inline bool irq_settings_is_per_cpu_devid(struct irq_desc *desc)
{
	return desc->status_use_accessors & IRQ_PER_CPU_DEVID;
}

static inline int irqs_disabled_flag(struct irq_desc *desc)
{
	return desc->istate & 0x80000000u;
}

static inline void chip_bus_lock(struct irq_desc *desc)
{
	if (unlikely(desc->irq_data.chip->irq_bus_lock))
		desc->irq_data.chip->irq_bus_lock(&desc->irq_data);
}

static inline void chip_bus_sync_unlock(struct irq_desc *desc)
{
	if (unlikely(desc->irq_data.chip->irq_bus_sync_unlock))
		desc->irq_data.chip->irq_bus_sync_unlock(&desc->irq_data);
}

struct irq_desc *irq_to_desc(unsigned int irq);
void irq_modify_status(unsigned int irq, unsigned long clr, unsigned long set);
unsigned int irq_find_mapping(struct irq_domain *domain, irq_hw_number_t hwirq);

static inline void irq_clear_status_flags(unsigned int irq, unsigned long clr)
{
	irq_modify_status(irq, clr, 0);
}

noinline struct irq_data *irq_get_irq_data(unsigned int irq)
{
	struct irq_desc *desc = irq_to_desc(irq);
	return desc ? &desc->irq_data : NULL;
}

static struct pt_regs *irq_regs;
static unsigned int preempt_count;

static inline struct pt_regs *set_irq_regs(struct pt_regs *new_regs)
{
	struct pt_regs *old = irq_regs;
	irq_regs = new_regs;
	return old;
}

noinline void irq_enter(void)
{
	preempt_count += 0x10000;
}

noinline void irq_exit(void)
{
	preempt_count -= 0x10000;
}

noinline void ack_bad_irq(unsigned int irq)
{
	printk(KERN_CRIT "unexpected IRQ trap at vector %02x\n", irq);
}

noinline int irq_chip_pm_get(struct irq_data *data)
{
	return data->chip ? 0 : -ENODEV;
}

noinline int irq_chip_pm_put(struct irq_data *data)
{
	return 0;
}

noinline irqreturn_t irq_default_primary_handler(int irq, void *dev_id)
{
	return 2;
}

/* irqdomain */

struct device_node {
	const char *name;
	struct device_node *child;
	struct device_node *sibling;
};

struct irq_domain_ops {
	int (*map)(struct irq_domain *d, unsigned int virq, irq_hw_number_t hw);
	int (*xlate)(struct irq_domain *d, struct device_node *node, const u32 *intspec,
		     unsigned int intsize, unsigned long *out_hwirq, unsigned int *out_type);
};

struct irq_domain {
	const char *name;
	const struct irq_domain_ops *ops;
	void *host_data;
	struct device_node *of_node;
	irq_hw_number_t hwirq_max;
	unsigned int revmap_direct_max_irq;
	unsigned int revmap_size;
	unsigned int *linear_revmap;
};

static inline int of_node_to_nid(struct device_node *np)
{
	return -1;
}

/* clockevents */

#define NSEC_PER_SEC 1000000000UL
#define KTIME_MAX ((long long)~((unsigned long long)1 << 63))
#define CLOCK_EVT_MODE_UNUSED 0
#define CLOCK_EVT_FEAT_ONESHOT 0x2

struct clock_event_device {
	void (*event_handler)(struct clock_event_device *);
	int (*set_next_event)(unsigned long evt, struct clock_event_device *);
	unsigned long long max_delta_ns;
	unsigned long long min_delta_ns;
	u32 mult;
	u32 shift;
	int mode;
	unsigned int features;
	unsigned long min_delta_ticks;
	unsigned long max_delta_ticks;
	const char *name;
	struct clock_event_device *next;
};

noinline void clockevents_notify_released(void)
{
	preempt_count ^= 1;
}

/* device tree */

static raw_spinlock_t devtree_lock;
struct device_node *of_stdout;

noinline const void *of_get_property(const struct device_node *np, const char *name, int *lenp)
{
	if (lenp)
		*lenp = 0;
	return np->name == name ? np->name : NULL;
}

#if !V26
void of_alias_scan(void *(*dt_alloc)(unsigned long size, unsigned long align));

noinline void *early_init_dt_alloc_memory_arch(unsigned long size, unsigned long align)
{
	return __kmalloc(size, align);
}

noinline void unflatten_device_tree(void)
{
	of_alias_scan(early_init_dt_alloc_memory_arch);
}
#endif

#define phys_to_virt(x) ((void *)(unsigned long)(x) + 0xc0000000u)

/* driver core */

struct bus_type {
	const char *name;
};

struct device {
	struct device *parent;
	struct bus_type *bus;
	const char *init_name;
	unsigned int kobj_refcount;
	unsigned long long dma_mask;
};

struct resource {
	unsigned long start;
	unsigned long end;
	unsigned long flags;
};

struct platform_device {
	const char *name;
	int id;
	struct device dev;
	unsigned int num_resources;
	struct resource *resource;
	unsigned long archdata;
};

struct device platform_bus = { .init_name = "platform" };
struct bus_type platform_bus_type = { .name = "platform" };

noinline int device_add(struct device *dev)
{
	if (!dev->init_name)
		return -EINVAL;
	dev->kobj_refcount++;
	return 0;
}

static inline void *ERR_PTR(long error)
{
	return (void *)error;
}

/* arch/arm machine descriptors, laid out like the real ones so the slot offsets line up */

struct sys_timer {
	void (*init)(void);
};

#if V26
struct machine_desc {
	unsigned int nr;
	unsigned int phys_io;
	unsigned int io_pg_offst;
	const char *name;
	unsigned long boot_params;
	unsigned int video_start;
	unsigned int video_end;
	unsigned int reserve_lp;
	unsigned int soft_reboot;
	void (*fixup)(void);
	void (*map_io)(void);
	void (*init_irq)(void);
	struct sys_timer *timer;
	void (*init_machine)(void);
};
#else
struct machine_desc {
	unsigned int nr;
	const char *name;
	unsigned long atag_offset;
	const char *const *dt_compat;
	unsigned int nr_irqs;
	unsigned int video_start;
	unsigned int video_end;
	unsigned int reserve_lp;
	unsigned int reboot_mode;
	unsigned int l2c_aux_val;
	unsigned int l2c_aux_mask;
	void (*l2c_write_sec)(unsigned long, unsigned);
	const void *smp;
	bool (*smp_init)(void);
	void (*fixup)(void);
	void (*dt_fixup)(void);
	void (*init_meminfo)(void);
	void (*reserve)(void);
	void (*map_io)(void);
	void (*init_early)(void);
	void (*init_irq)(void);
	void (*init_time)(void);
	void (*init_machine)(void);
};
#endif

#endif
