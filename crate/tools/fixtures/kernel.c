/*
 * A kernel-shaped fixture: the board, irq, irqdomain, clockevents and platform pieces that
 * the pointer catalog targets, modelled on the corresponding mainline code, plus enough
 * surrounding infrastructure for them to be called the way the real kernel calls them.
 *
 * LINUX_VERSION_CODE and UTS_RELEASE come from the build script.
 */

#define KV(a, b, c) (((a) << 16) + ((b) << 8) + (c))
#define V26 (LINUX_VERSION_CODE < KV(3, 0, 0))
#define V318 (LINUX_VERSION_CODE >= KV(3, 18, 0) && LINUX_VERSION_CODE < KV(3, 19, 0))
#define V44_PLUS (LINUX_VERSION_CODE >= KV(4, 4, 0))

#include "kernel.h"

const char linux_banner[] =
	"Linux version " UTS_RELEASE " (builder@fixture) (clang version 14.0.0) #1 PREEMPT\n";

/* ---- kernel/printk ---------------------------------------------------------------- */

static char log_buf[4096];
static unsigned int log_next;
int console_loglevel = 7;

noinline int vscnprintf(char *buf, size_t size, const char *fmt, va_list args)
{
	size_t n = 0;
	while (*fmt && n + 1 < size) {
		if (*fmt == '%' && fmt[1]) {
			unsigned long v = va_arg(args, unsigned long);
			fmt += 2;
			do {
				buf[n++] = "0123456789abcdef"[v & 15];
				v >>= 4;
			} while (v && n + 1 < size);
			continue;
		}
		buf[n++] = *fmt++;
	}
	buf[n] = 0;
	return (int)n;
}

noinline int printk(const char *fmt, ...)
{
	va_list args;
	int r;
	va_start(args, fmt);
	r = vscnprintf(log_buf + log_next, sizeof(log_buf) - log_next, fmt, args);
	va_end(args);
	log_next = (log_next + r) & 2047;
	return r;
}

noinline void early_print(const char *str, ...)
{
	char buf[256];
	va_list ap;
	va_start(ap, str);
	vscnprintf(buf, sizeof(buf), str, ap);
	va_end(ap);
	printk("%s", buf);
}

noinline void panic(const char *fmt, ...)
{
	printk(KERN_EMERG "Kernel panic - not syncing: %s\n", fmt);
	for (;;)
		;
}

noinline void warn_slowpath_null(const char *file, int line)
{
	printk(KERN_WARNING "WARNING: at %s:%d\n", file, line);
}

noinline void warn_slowpath_fmt(const char *file, int line, const char *fmt, ...)
{
	printk(KERN_WARNING "WARNING: at %s:%d\n", file, line);
	printk(fmt, line);
}

noinline void __bug(const char *file, int line)
{
	printk(KERN_CRIT "kernel BUG at %s:%d!\n", file, line);
	*(volatile int *)0 = 0;
	for (;;)
		;
}

/* ---- mm ----------------------------------------------------------------------------- */

static char heap[65536];
static size_t heap_next;

noinline void *__kmalloc(size_t size, unsigned int flags)
{
	void *p;
	size = (size + 7) & ~7u;
	if (heap_next + size > sizeof(heap))
		return NULL;
	p = heap + heap_next;
	heap_next += size;
	if (flags & __GFP_ZERO) {
		char *c = p;
		while (size--)
			*c++ = 0;
	}
	return p;
}

noinline void kfree(const void *p)
{
	if (p == (void *)heap + heap_next)
		heap_next = 0;
}

static inline void *kzalloc(size_t size, unsigned int flags)
{
	return __kmalloc(size, flags | __GFP_ZERO);
}

/* ---- locking ------------------------------------------------------------------------ */

noinline unsigned long _raw_spin_lock_irqsave(raw_spinlock_t *lock)
{
	unsigned long flags = lock->owner;
	lock->owner = 1;
	return flags;
}

noinline void _raw_spin_unlock_irqrestore(raw_spinlock_t *lock, unsigned long flags)
{
	lock->owner = flags & 0;
}

noinline void _raw_spin_lock(raw_spinlock_t *lock)
{
	lock->owner = 1;
}

noinline void _raw_spin_unlock(raw_spinlock_t *lock)
{
	lock->owner = 0;
}

/* ---- arch/arm/lib ------------------------------------------------------------------- */

noinline unsigned long long __do_div64(unsigned long long n, unsigned int base)
{
	unsigned long long q = 0, bit = 1, d = base;
	if (!base)
		return 0;
	while ((long long)d > 0 && d < n) {
		d <<= 1;
		bit <<= 1;
	}
	while (bit) {
		if (n >= d) {
			n -= d;
			q |= bit;
		}
		d >>= 1;
		bit >>= 1;
	}
	return q;
}

/* ---- kernel/irq/irqdesc.c ----------------------------------------------------------- */

struct irq_desc irq_desc[NR_IRQS];
int nr_irqs = NR_IRQS;
struct irq_chip no_irq_chip = { .name = "none" };
struct irq_chip dummy_irq_chip = { .name = "dummy" };

noinline struct irq_desc *irq_to_desc(unsigned int irq)
{
	return (irq < NR_IRQS) ? irq_desc + irq : NULL;
}

#if !V26
noinline struct irq_desc *__irq_get_desc_lock(unsigned int irq, unsigned long *flags, bool bus, unsigned int check)
{
	struct irq_desc *desc = irq_to_desc(irq);
	if (desc) {
		if (check & 1) {
			if (!(desc->status_use_accessors & IRQ_PER_CPU_DEVID))
				return NULL;
		}
		if (bus)
			desc->irq_data.chip->irq_bus_lock(&desc->irq_data);
		*flags = _raw_spin_lock_irqsave(&desc->lock);
	}
	return desc;
}

noinline void __irq_put_desc_unlock(struct irq_desc *desc, unsigned long flags, bool bus)
{
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
	if (bus)
		desc->irq_data.chip->irq_bus_sync_unlock(&desc->irq_data);
}

static inline struct irq_desc *irq_get_desc_lock(unsigned int irq, unsigned long *flags, unsigned int check)
{
	return __irq_get_desc_lock(irq, flags, false, check);
}

static inline void irq_put_desc_unlock(struct irq_desc *desc, unsigned long flags)
{
	__irq_put_desc_unlock(desc, flags, false);
}
#endif

noinline int generic_handle_irq(unsigned int irq)
{
	struct irq_desc *desc = irq_to_desc(irq);
	if (!desc)
		return -EINVAL;
	desc->handle_irq(irq, desc);
	return 0;
}

/* ---- kernel/irq/handle.c ------------------------------------------------------------ */

#line 130 "kernel/irq/handle.c"
noinline irqreturn_t handle_irq_event_percpu(struct irq_desc *desc, struct irqaction *action)
{
	irqreturn_t retval = IRQ_NONE;
	unsigned int irq = desc->irq_data.irq;
	do {
		irqreturn_t res = action->handler(irq, action->dev_id);
		WARN_ONCE(irqs_disabled_flag(desc), "irq %u handler %pF enabled interrupts\n", irq, action->handler);
		retval |= res;
		action = action->next;
	} while (action);
	return retval;
}

noinline irqreturn_t handle_irq_event(struct irq_desc *desc)
{
	struct irqaction *action = desc->action;
	irqreturn_t ret;
	desc->istate &= ~IRQS_PENDING;
	irqd_set(&desc->irq_data, IRQD_IRQ_INPROGRESS);
	_raw_spin_unlock(&desc->lock);
	ret = handle_irq_event_percpu(desc, action);
	_raw_spin_lock(&desc->lock);
	irqd_clear(&desc->irq_data, IRQD_IRQ_INPROGRESS);
	return ret;
}

/* ---- kernel/irq/chip.c -------------------------------------------------------------- */

#line 20 "kernel/irq/chip.c"
#if V26
noinline int set_irq_chip(unsigned int irq, struct irq_chip *chip)
{
	struct irq_desc *desc = irq_to_desc(irq);
	unsigned long flags;
	if (!desc) {
		WARN(1, KERN_ERR "Trying to install chip for IRQ%d\n", irq);
		return -EINVAL;
	}
	if (!chip)
		chip = &no_irq_chip;
	flags = _raw_spin_lock_irqsave(&desc->lock);
	desc->irq_data.chip = chip;
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
	return 0;
}

noinline int irq_set_chip_data(unsigned int irq, void *data)
{
	struct irq_desc *desc = irq_to_desc(irq);
	unsigned long flags;
	if (!desc) {
		printk(KERN_ERR "Trying to install chip data for IRQ%d\n", irq);
		return -EINVAL;
	}
	if (!desc->irq_data.chip) {
		printk(KERN_ERR "BUG: bad set_irq_chip_data(IRQ#%d)\n", irq);
		return -EINVAL;
	}
	flags = _raw_spin_lock_irqsave(&desc->lock);
	desc->irq_data.chip_data = data;
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
	return 0;
}

noinline int set_irq_data(unsigned int irq, void *data)
{
	struct irq_desc *desc = irq_to_desc(irq);
	unsigned long flags;
	if (!desc) {
		printk(KERN_ERR "Trying to install controller data for IRQ%d\n", irq);
		return -EINVAL;
	}
	flags = _raw_spin_lock_irqsave(&desc->lock);
	desc->irq_data.handler_data = data;
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
	return 0;
}

noinline int set_irq_type(unsigned int irq, unsigned int type)
{
	struct irq_desc *desc = irq_to_desc(irq);
	unsigned long flags;
	int ret = -ENXIO;
	if (!desc) {
		printk(KERN_ERR "Trying to set irq type for IRQ%d\n", irq);
		return -ENODEV;
	}
	type &= IRQ_TYPE_SENSE_MASK;
	if (type == IRQ_TYPE_NONE)
		return 0;
	flags = _raw_spin_lock_irqsave(&desc->lock);
	if (desc->irq_data.chip->irq_set_type)
		ret = desc->irq_data.chip->irq_set_type(&desc->irq_data, type);
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
	return ret;
}
#else
noinline int irq_set_chip(unsigned int irq, struct irq_chip *chip)
{
	unsigned long flags;
	struct irq_desc *desc = irq_get_desc_lock(irq, &flags, 0);
	if (!desc)
		return -EINVAL;
	if (!chip)
		chip = &no_irq_chip;
	desc->irq_data.chip = chip;
	irq_put_desc_unlock(desc, flags);
	return 0;
}

noinline int irq_set_irq_type(unsigned int irq, unsigned int type)
{
	unsigned long flags;
	struct irq_desc *desc = __irq_get_desc_lock(irq, &flags, true, 1);
	int ret = 0;
	if (!desc)
		return -EINVAL;
	type &= IRQ_TYPE_SENSE_MASK;
	if (desc->irq_data.chip->irq_set_type)
		ret = desc->irq_data.chip->irq_set_type(&desc->irq_data, type);
	__irq_put_desc_unlock(desc, flags, true);
	return ret;
}

noinline int irq_set_handler_data(unsigned int irq, void *data)
{
	unsigned long flags;
	struct irq_desc *desc = irq_get_desc_lock(irq, &flags, 0);
	if (!desc)
		return -EINVAL;
	desc->irq_data.handler_data = data;
	irq_put_desc_unlock(desc, flags);
	return 0;
}

noinline int irq_set_chip_data(unsigned int irq, void *data)
{
	unsigned long flags;
	struct irq_desc *desc = irq_get_desc_lock(irq, &flags, 0);
	if (!desc)
		return -EINVAL;
	desc->irq_data.chip_data = data;
	irq_put_desc_unlock(desc, flags);
	return 0;
}
#endif

noinline void unmask_irq(struct irq_desc *desc)
{
	if (desc->irq_data.chip->irq_unmask) {
		desc->irq_data.chip->irq_unmask(&desc->irq_data);
		irqd_clear(&desc->irq_data, IRQD_IRQ_MASKED);
	}
}

noinline void mask_irq(struct irq_desc *desc)
{
	if (desc->irq_data.chip->irq_mask) {
		desc->irq_data.chip->irq_mask(&desc->irq_data);
		irqd_set(&desc->irq_data, IRQD_IRQ_MASKED);
	}
}

static noinline void mask_ack_irq(struct irq_desc *desc)
{
	if (desc->irq_data.chip->irq_mask_ack)
		desc->irq_data.chip->irq_mask_ack(&desc->irq_data);
	else {
		desc->irq_data.chip->irq_mask(&desc->irq_data);
		if (desc->irq_data.chip->irq_ack)
			desc->irq_data.chip->irq_ack(&desc->irq_data);
	}
	irqd_set(&desc->irq_data, IRQD_IRQ_MASKED);
}

noinline void handle_bad_irq(unsigned int irq, struct irq_desc *desc)
{
	printk(KERN_ERR "unexpected IRQ trap at vector %02x\n", irq);
	desc->irqs_unhandled++;
}

noinline void handle_simple_irq(unsigned int irq, struct irq_desc *desc)
{
	_raw_spin_lock(&desc->lock);
	desc->istate &= ~(IRQS_REPLAY | IRQS_WAITING);
	if (unlikely(!desc->action || irqd_irq_disabled(&desc->irq_data))) {
		desc->istate |= IRQS_PENDING;
		goto out_unlock;
	}
	handle_irq_event(desc);
out_unlock:
	_raw_spin_unlock(&desc->lock);
}

noinline void handle_level_irq(unsigned int irq, struct irq_desc *desc)
{
	_raw_spin_lock(&desc->lock);
	mask_ack_irq(desc);
	if (unlikely(irqd_irq_inprogress(&desc->irq_data)))
		goto out_unlock;
	desc->istate &= ~(IRQS_REPLAY | IRQS_WAITING);
	desc->irq_count++;
	if (unlikely(!desc->action || irqd_irq_disabled(&desc->irq_data))) {
		desc->istate |= IRQS_PENDING;
		goto out_unlock;
	}
	handle_irq_event(desc);
	if (!irqd_irq_disabled(&desc->irq_data) && irqd_irq_masked(&desc->irq_data))
		unmask_irq(desc);
out_unlock:
	_raw_spin_unlock(&desc->lock);
}

noinline void handle_fasteoi_irq(unsigned int irq, struct irq_desc *desc)
{
	struct irq_chip *chip = desc->irq_data.chip;
	_raw_spin_lock(&desc->lock);
	if (unlikely(irqd_irq_inprogress(&desc->irq_data)))
		goto out;
	desc->istate &= ~(IRQS_REPLAY | IRQS_WAITING);
	desc->irq_count++;
	if (unlikely(!desc->action || irqd_irq_disabled(&desc->irq_data))) {
		desc->istate |= IRQS_PENDING;
		mask_irq(desc);
		goto out;
	}
	handle_irq_event(desc);
out:
	chip->irq_eoi(&desc->irq_data);
	_raw_spin_unlock(&desc->lock);
}

noinline void handle_edge_irq(unsigned int irq, struct irq_desc *desc)
{
	_raw_spin_lock(&desc->lock);
	desc->istate &= ~(IRQS_REPLAY | IRQS_WAITING);
	if (unlikely(irqd_irq_disabled(&desc->irq_data) || irqd_irq_inprogress(&desc->irq_data) || !desc->action)) {
		desc->istate |= IRQS_PENDING;
		mask_ack_irq(desc);
		goto out_unlock;
	}
	desc->irq_count++;
	desc->irq_data.chip->irq_ack(&desc->irq_data);
	do {
		if (unlikely(!desc->action)) {
			mask_irq(desc);
			goto out_unlock;
		}
		if (unlikely(desc->istate & IRQS_PENDING)) {
			if (!irqd_irq_disabled(&desc->irq_data) && irqd_irq_masked(&desc->irq_data))
				unmask_irq(desc);
		}
		handle_irq_event(desc);
	} while ((desc->istate & IRQS_PENDING) && !irqd_irq_disabled(&desc->irq_data));
out_unlock:
	_raw_spin_unlock(&desc->lock);
}

#if V26
#line 130 "kernel/irq/chip.c"
noinline void __set_irq_handler(unsigned int irq, irq_flow_handler_t handle, int is_chained, const char *name)
{
	struct irq_desc *desc = irq_to_desc(irq);
	unsigned long flags;
	if (!desc) {
		printk(KERN_ERR "Trying to install type control for IRQ%d\n", irq);
		return;
	}
	if (!handle)
		handle = handle_bad_irq;
	else if (desc->irq_data.chip == &no_irq_chip) {
		printk(KERN_WARNING "Trying to install %sinterrupt handler for IRQ%d\n", is_chained ? "chained " : "", irq);
		desc->irq_data.chip = &dummy_irq_chip;
	}
	flags = _raw_spin_lock_irqsave(&desc->lock);
	if (handle == handle_bad_irq) {
		if (desc->irq_data.chip != &no_irq_chip)
			mask_ack_irq(desc);
		desc->status_use_accessors |= IRQ_DISABLED;
		desc->depth = 1;
	}
	desc->handle_irq = handle;
	desc->name = name;
	if (handle != handle_bad_irq && is_chained) {
		desc->status_use_accessors &= ~IRQ_DISABLED;
		desc->status_use_accessors |= IRQ_NOREQUEST | IRQ_NOPROBE;
		desc->depth = 0;
		desc->irq_data.chip->irq_startup(&desc->irq_data);
	}
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
}

static inline void set_irq_handler(unsigned int irq, irq_flow_handler_t handle)
{
	__set_irq_handler(irq, handle, 0, NULL);
}

static inline void set_irq_chip_and_handler(unsigned int irq, struct irq_chip *chip, irq_flow_handler_t handle)
{
	set_irq_chip(irq, chip);
	__set_irq_handler(irq, handle, 0, NULL);
}
#else
#line 700 "kernel/irq/chip.c"
noinline void __irq_set_handler(unsigned int irq, irq_flow_handler_t handle, int is_chained, const char *name)
{
	unsigned long flags;
	struct irq_desc *desc = __irq_get_desc_lock(irq, &flags, true, 0);
	if (!desc)
		return;
	if (!handle) {
		handle = handle_bad_irq;
	} else {
		if (WARN_ON(desc->irq_data.chip == &no_irq_chip))
			goto out;
	}
	if (handle == handle_bad_irq) {
		if (desc->irq_data.chip != &no_irq_chip)
			mask_ack_irq(desc);
		irq_state_set_disabled(desc);
		desc->depth = 1;
	}
	desc->handle_irq = handle;
	desc->name = name;
	if (handle != handle_bad_irq && is_chained) {
		desc->status_use_accessors |= IRQ_NOREQUEST | IRQ_NOPROBE | IRQ_NOTHREAD;
		desc->depth = 0;
		desc->irq_data.chip->irq_startup(&desc->irq_data);
	}
out:
	__irq_put_desc_unlock(desc, flags, true);
}

noinline void irq_set_chip_and_handler_name(unsigned int irq, struct irq_chip *chip, irq_flow_handler_t handle, const char *name)
{
	irq_set_chip(irq, chip);
	__irq_set_handler(irq, handle, 0, name);
}

static inline void irq_set_chip_and_handler(unsigned int irq, struct irq_chip *chip, irq_flow_handler_t handle)
{
	irq_set_chip_and_handler_name(irq, chip, handle, NULL);
}

static inline void irq_set_handler(unsigned int irq, irq_flow_handler_t handle)
{
	__irq_set_handler(irq, handle, 0, NULL);
}

static inline void irq_set_chained_handler(unsigned int irq, irq_flow_handler_t handle)
{
	__irq_set_handler(irq, handle, 1, NULL);
}

noinline void irq_modify_status(unsigned int irq, unsigned long clr, unsigned long set)
{
	unsigned long flags;
	struct irq_desc *desc = irq_get_desc_lock(irq, &flags, 0);
	unsigned int trigger;
	if (!desc)
		return;
	desc->status_use_accessors &= ~(clr & _IRQF_MODIFY_MASK);
	desc->status_use_accessors |= (set & _IRQF_MODIFY_MASK);
	irqd_clear(&desc->irq_data, IRQD_NO_BALANCING | IRQD_PER_CPU | IRQD_TRIGGER_MASK | IRQD_LEVEL | IRQD_MOVE_PCNTXT);
	if (desc->status_use_accessors & IRQ_NO_BALANCING)
		irqd_set(&desc->irq_data, IRQD_NO_BALANCING);
	if (desc->status_use_accessors & IRQ_PER_CPU)
		irqd_set(&desc->irq_data, IRQD_PER_CPU);
	if (desc->status_use_accessors & IRQ_MOVE_PCNTXT)
		irqd_set(&desc->irq_data, IRQD_MOVE_PCNTXT);
	if (desc->status_use_accessors & IRQ_LEVEL)
		irqd_set(&desc->irq_data, IRQD_LEVEL);
	trigger = desc->status_use_accessors & IRQ_TYPE_SENSE_MASK;
	if (trigger)
		irqd_set(&desc->irq_data, trigger);
	irq_put_desc_unlock(desc, flags);
}
#endif

/* ---- arch/arm/kernel/irq.c ---------------------------------------------------------- */

#line 60 "arch/arm/kernel/irq.c"
void (*handle_arch_irq)(struct pt_regs *);

#if !V44_PLUS
noinline void set_irq_flags(unsigned int irq, unsigned int iflags)
{
#if V26
	struct irq_desc *desc;
	unsigned long flags;
	if (irq >= nr_irqs) {
		printk(KERN_ERR "Trying to set irq flags for IRQ%d\n", irq);
		return;
	}
	desc = irq_to_desc(irq);
	flags = _raw_spin_lock_irqsave(&desc->lock);
	desc->status_use_accessors |= IRQ_NOREQUEST | IRQ_NOPROBE | IRQ_NOAUTOEN;
	if (iflags & IRQF_VALID)
		desc->status_use_accessors &= ~IRQ_NOREQUEST;
	if (iflags & IRQF_PROBE)
		desc->status_use_accessors &= ~IRQ_NOPROBE;
	if (!(iflags & IRQF_NOAUTOEN))
		desc->status_use_accessors &= ~IRQ_NOAUTOEN;
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
#else
	unsigned long clr = 0, set = IRQ_NOREQUEST | IRQ_NOPROBE | IRQ_NOAUTOEN;
	if (irq >= nr_irqs) {
		printk(KERN_ERR "Trying to set irq flags for IRQ%d\n", irq);
		return;
	}
	if (iflags & IRQF_VALID)
		clr |= IRQ_NOREQUEST;
	if (iflags & IRQF_PROBE)
		clr |= IRQ_NOPROBE;
	if (!(iflags & IRQF_NOAUTOEN))
		clr |= IRQ_NOAUTOEN;
	irq_modify_status(irq, clr, set & ~clr);
#endif
}
#endif

#if !V26
noinline void set_handle_irq(void (*handle_irq)(struct pt_regs *))
{
	if (handle_arch_irq)
		return;
	handle_arch_irq = handle_irq;
}

#line 40 "kernel/irq/irqdesc.c"
noinline int __handle_domain_irq(struct irq_domain *domain, unsigned int hwirq, bool lookup, struct pt_regs *regs)
{
	struct pt_regs *old_regs = set_irq_regs(regs);
	unsigned int irq = hwirq;
	int ret = 0;
	irq_enter();
	if (lookup)
		irq = irq_find_mapping(domain, hwirq);
	if (unlikely(!irq || irq >= nr_irqs)) {
		ack_bad_irq(irq);
		ret = -EINVAL;
	} else {
		generic_handle_irq(irq);
	}
	irq_exit();
	set_irq_regs(old_regs);
	return ret;
}
#endif

noinline void asm_do_IRQ(unsigned int irq, struct pt_regs *regs)
{
	struct pt_regs *old_regs = set_irq_regs(regs);
	irq_enter();
	if (unlikely(irq >= nr_irqs)) {
		printk(KERN_WARNING "Bad IRQ%u\n", irq);
		ack_bad_irq(irq);
	} else {
		generic_handle_irq(irq);
	}
	irq_exit();
	set_irq_regs(old_regs);
}

/* ---- kernel/irq/manage.c ------------------------------------------------------------ */

#line 1000 "kernel/irq/manage.c"
noinline int __setup_irq(unsigned int irq, struct irq_desc *desc, struct irqaction *new)
{
	struct irqaction *old, **old_ptr;
	unsigned long flags;
	int shared = 0;
	if (!desc)
		return -EINVAL;
	if (desc->irq_data.chip == &no_irq_chip)
		return -ENOSYS;
	flags = _raw_spin_lock_irqsave(&desc->lock);
	old_ptr = &desc->action;
	old = *old_ptr;
	if (old) {
		if (!((old->flags & new->flags) & IRQF_SHARED) || ((old->flags ^ new->flags) & IRQF_TRIGGER_MASK)) {
			_raw_spin_unlock_irqrestore(&desc->lock, flags);
			printk(KERN_ERR "Flags mismatch irq %d. %08x (%s) vs. %08x (%s)\n", irq, new->flags, new->name, old->flags, old->name);
			return -EBUSY;
		}
		do {
			old_ptr = &old->next;
			old = *old_ptr;
		} while (old);
		shared = 1;
	}
	if (!shared) {
		desc->istate &= ~(IRQS_AUTODETECT | IRQS_SPURIOUS_DISABLED | IRQS_ONESHOT | IRQS_WAITING);
		desc->depth = 0;
		if (desc->irq_data.chip->irq_startup)
			desc->irq_data.chip->irq_startup(&desc->irq_data);
	}
	new->irq = irq;
	*old_ptr = new;
	desc->irq_count = 0;
	desc->irqs_unhandled = 0;
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
	return 0;
}

#if V26
#line 1030 "kernel/irq/manage.c"
noinline int setup_irq(unsigned int irq, struct irqaction *act)
{
	struct irq_desc *desc = irq_to_desc(irq);
	return __setup_irq(irq, desc, act);
}
#elif V318
#line 1225 "kernel/irq/manage.c"
noinline int setup_irq(unsigned int irq, struct irqaction *act)
{
	int retval;
	struct irq_desc *desc = irq_to_desc(irq);
	if (WARN_ON(irq_settings_is_per_cpu_devid(desc)))
		return -EINVAL;
	chip_bus_lock(desc);
	retval = __setup_irq(irq, desc, act);
	chip_bus_sync_unlock(desc);
	return retval;
}
#elif LINUX_VERSION_CODE < KV(4, 14, 0)
#line 1447 "kernel/irq/manage.c"
noinline int setup_irq(unsigned int irq, struct irqaction *act)
{
	int retval;
	struct irq_desc *desc = irq_to_desc(irq);
	if (!desc || WARN_ON(irq_settings_is_per_cpu_devid(desc)))
		return -EINVAL;
	chip_bus_lock(desc);
	retval = __setup_irq(irq, desc, act);
	chip_bus_sync_unlock(desc);
	return retval;
}
#else
#line 1581 "kernel/irq/manage.c"
noinline int setup_irq(unsigned int irq, struct irqaction *act)
{
	int retval;
	struct irq_desc *desc = irq_to_desc(irq);
	if (!desc || WARN_ON(irq_settings_is_per_cpu_devid(desc)))
		return -EINVAL;
	retval = irq_chip_pm_get(&desc->irq_data);
	if (retval < 0)
		return retval;
	chip_bus_lock(desc);
	retval = __setup_irq(irq, desc, act);
	chip_bus_sync_unlock(desc);
	if (retval)
		irq_chip_pm_put(&desc->irq_data);
	return retval;
}
#endif

#line 1700 "kernel/irq/manage.c"
noinline int request_threaded_irq(unsigned int irq, irq_handler_t handler, irq_handler_t thread_fn, unsigned long irqflags, const char *devname, void *dev_id)
{
	struct irqaction *action;
	struct irq_desc *desc;
	int retval;
	if ((irqflags & IRQF_SHARED) && !dev_id)
		return -EINVAL;
	desc = irq_to_desc(irq);
	if (!desc)
		return -EINVAL;
	if (!handler) {
		if (!thread_fn)
			return -EINVAL;
		handler = irq_default_primary_handler;
	}
	action = kzalloc(sizeof(struct irqaction), GFP_KERNEL);
	if (!action)
		return -ENOMEM;
	action->handler = handler;
	action->flags = irqflags;
	action->name = devname;
	action->dev_id = dev_id;
	chip_bus_lock(desc);
	retval = __setup_irq(irq, desc, action);
	chip_bus_sync_unlock(desc);
	if (retval)
		kfree(action);
	return retval;
}

noinline void free_irq(unsigned int irq, void *dev_id)
{
	struct irq_desc *desc = irq_to_desc(irq);
	struct irqaction **p;
	unsigned long flags;
	if (!desc)
		return;
	flags = _raw_spin_lock_irqsave(&desc->lock);
	for (p = &desc->action; *p; p = &(*p)->next) {
		if ((*p)->dev_id == dev_id) {
			struct irqaction *a = *p;
			*p = a->next;
			_raw_spin_unlock_irqrestore(&desc->lock, flags);
			kfree(a);
			return;
		}
	}
	WARN(1, "Trying to free already-free IRQ %d\n", irq);
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
}

noinline void disable_irq_nosync(unsigned int irq)
{
	struct irq_desc *desc = irq_to_desc(irq);
	unsigned long flags;
	if (!desc)
		return;
	flags = _raw_spin_lock_irqsave(&desc->lock);
	if (!desc->depth++)
		mask_irq(desc);
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
}

noinline void enable_irq(unsigned int irq)
{
	struct irq_desc *desc = irq_to_desc(irq);
	unsigned long flags;
	if (!desc)
		return;
	flags = _raw_spin_lock_irqsave(&desc->lock);
	if (desc->depth == 0)
		WARN(1, KERN_WARNING "Unbalanced enable for IRQ %d\n", irq);
	else if (!--desc->depth)
		unmask_irq(desc);
	_raw_spin_unlock_irqrestore(&desc->lock, flags);
}

/* ---- kernel/irq/irqdomain.c --------------------------------------------------------- */

#if !V26
struct irq_domain *irq_default_domain;
static struct irq_domain domain_pool[8];
static unsigned int domain_count;

#line 120 "kernel/irq/irqdomain.c"
noinline struct irq_domain *__irq_domain_add(struct device_node *of_node, int size, irq_hw_number_t hwirq_max, int direct_max, const struct irq_domain_ops *ops, void *host_data)
{
	struct irq_domain *domain;
	if (domain_count >= 8)
		return NULL;
	domain = &domain_pool[domain_count++];
	domain->ops = ops;
	domain->host_data = host_data;
	domain->of_node = of_node;
	domain->hwirq_max = hwirq_max;
	domain->revmap_size = size;
	domain->revmap_direct_max_irq = direct_max;
	domain->linear_revmap = kzalloc(sizeof(unsigned int) * size, GFP_KERNEL);
	printk(KERN_DEBUG "Added domain %s\n", domain->name ? domain->name : "");
	return domain;
}

noinline int irq_domain_associate(struct irq_domain *domain, unsigned int virq, irq_hw_number_t hwirq)
{
	struct irq_data *irq_data = irq_get_irq_data(virq);
	int ret;
	if (WARN(hwirq >= domain->hwirq_max, "error: hwirq 0x%x is too large for %s\n", (int)hwirq, domain->name))
		return -EINVAL;
	if (WARN(!irq_data, "error: virq%i is not allocated", virq))
		return -EINVAL;
	if (WARN(irq_data->domain, "error: virq%i is already associated", virq))
		return -EINVAL;
	irq_data->hwirq = hwirq;
	irq_data->domain = domain;
	if (domain->ops->map) {
		ret = domain->ops->map(domain, virq, hwirq);
		if (ret != 0) {
			if (ret != -EPERM)
				printk(KERN_INFO "%s didn't like hwirq-0x%lx to VIRQ%i mapping (rc=%d)\n", domain->name, hwirq, virq, ret);
			irq_data->domain = NULL;
			irq_data->hwirq = 0;
			return ret;
		}
	}
	if (hwirq < domain->revmap_size)
		domain->linear_revmap[hwirq] = virq;
	irq_clear_status_flags(virq, IRQ_NOREQUEST);
	return 0;
}

noinline void irq_domain_associate_many(struct irq_domain *domain, unsigned int irq_base, irq_hw_number_t hwirq_base, int count)
{
	int i;
	printk(KERN_DEBUG "%s(%s, irqbase=%i, hwbase=%i, count=%i)\n", __func__, domain->name, irq_base, (int)hwirq_base, count);
	for (i = 0; i < count; i++)
		irq_domain_associate(domain, irq_base + i, hwirq_base + i);
}

noinline struct irq_domain *irq_domain_add_simple(struct device_node *of_node, unsigned int size, unsigned int first_irq, const struct irq_domain_ops *ops, void *host_data)
{
	struct irq_domain *domain;
	domain = __irq_domain_add(of_node, size, size, 0, ops, host_data);
	if (!domain)
		return NULL;
	if (first_irq > 0) {
		int rc = __irq_alloc_descs(first_irq, first_irq, size, of_node_to_nid(of_node));
		if (rc < 0)
			printk(KERN_INFO "Cannot allocate irq_descs @ IRQ%d, assuming pre-allocated\n", first_irq);
		irq_domain_associate_many(domain, first_irq, 0, size);
	}
	return domain;
}

noinline struct irq_domain *irq_domain_add_legacy(struct device_node *of_node, unsigned int size, unsigned int first_irq, irq_hw_number_t first_hwirq, const struct irq_domain_ops *ops, void *host_data)
{
	struct irq_domain *domain;
	domain = __irq_domain_add(of_node, first_hwirq + size, first_hwirq + size, 0, ops, host_data);
	if (domain)
		irq_domain_associate_many(domain, first_irq, first_hwirq, size);
	return domain;
}

noinline unsigned int irq_find_mapping(struct irq_domain *domain, irq_hw_number_t hwirq)
{
	struct irq_data *data;
	if (domain == NULL)
		domain = irq_default_domain;
	if (domain == NULL)
		return 0;
	if (hwirq < domain->revmap_direct_max_irq) {
		data = irq_get_irq_data(hwirq);
		if (data && data->hwirq == hwirq)
			return hwirq;
	}
	if (hwirq < domain->revmap_size)
		return domain->linear_revmap[hwirq];
	return 0;
}

noinline int __irq_alloc_descs(int irq, unsigned int from, unsigned int cnt, int node)
{
	unsigned int i;
	if (from + cnt > NR_IRQS)
		return -ENOMEM;
	for (i = from; i < from + cnt; i++)
		if (irq_desc[i].action)
			return -EEXIST;
	return irq >= 0 ? irq : (int)from;
}

noinline int irq_domain_alloc_descs(int virq, unsigned int cnt, irq_hw_number_t hwirq, int node)
{
	unsigned int i;
	for (i = 16; i < NR_IRQS; i++)
		if (!irq_desc[i].irq_data.domain && !irq_desc[i].action)
			return i;
	return -ENOSPC;
}

#line 460 "kernel/irq/irqdomain.c"
noinline unsigned int irq_create_mapping(struct irq_domain *domain, irq_hw_number_t hwirq)
{
	int virq;
	if (domain == NULL)
		domain = irq_default_domain;
	if (domain == NULL) {
		WARN(1, "%s(, %lx) called with NULL domain\n", __func__, hwirq);
		return 0;
	}
	virq = irq_find_mapping(domain, hwirq);
	if (virq)
		return virq;
	virq = irq_domain_alloc_descs(-1, 1, hwirq, of_node_to_nid(domain->of_node));
	if (virq <= 0)
		return 0;
	if (irq_domain_associate(domain, virq, hwirq))
		return 0;
	return virq;
}

#if V318
#line 740 "kernel/irq/irqdomain.c"
#elif LINUX_VERSION_CODE < KV(4, 14, 0)
#line 775 "kernel/irq/irqdomain.c"
#else
#line 830 "kernel/irq/irqdomain.c"
#endif
noinline int irq_domain_xlate_onecell(struct irq_domain *d, struct device_node *ctrlr, const u32 *intspec, unsigned int intsize, unsigned long *out_hwirq, unsigned int *out_type)
{
	if (WARN_ON(intsize < 1))
		return -EINVAL;
	*out_hwirq = intspec[0];
	*out_type = IRQ_TYPE_NONE;
	return 0;
}

noinline int irq_domain_xlate_twocell(struct irq_domain *d, struct device_node *ctrlr, const u32 *intspec, unsigned int intsize, irq_hw_number_t *out_hwirq, unsigned int *out_type)
{
	if (WARN_ON(intsize < 2))
		return -EINVAL;
	*out_hwirq = intspec[0];
	*out_type = intspec[1] & IRQ_TYPE_SENSE_MASK;
	return 0;
}

noinline int irq_domain_xlate_onetwocell(struct irq_domain *d, struct device_node *ctrlr, const u32 *intspec, unsigned int intsize, unsigned long *out_hwirq, unsigned int *out_type)
{
	if (WARN_ON(intsize < 1))
		return -EINVAL;
	*out_hwirq = intspec[0];
	*out_type = (intsize > 1) ? intspec[1] : IRQ_TYPE_NONE;
	return 0;
}
#endif

/* ---- kernel/time/clockevents.c ------------------------------------------------------ */

#line 30 "kernel/time/clockevents.c"
static raw_spinlock_t clockevents_lock;
static struct clock_event_device *clockevent_devices;

#if V26
#line 40 "kernel/time/clockevents.c"
noinline unsigned long long clockevent_delta2ns(unsigned long latch, struct clock_event_device *evt)
{
	unsigned long long clc = (unsigned long long)latch << evt->shift;
	if (unlikely(!evt->mult)) {
		evt->mult = 1;
		WARN_ON(1);
	}
	clc = __do_div64(clc, evt->mult);
	if (clc < 1000)
		clc = 1000;
	if (clc > KTIME_MAX)
		clc = KTIME_MAX;
	return clc;
}
#else
noinline unsigned long long cev_delta2ns(unsigned long latch, struct clock_event_device *evt, bool ismax)
{
	unsigned long long clc = (unsigned long long)latch << evt->shift;
	unsigned long long rnd;
	if (unlikely(!evt->mult)) {
		evt->mult = 1;
		WARN_ON(1);
	}
	rnd = (unsigned long long)evt->mult - 1;
	if ((clc >> evt->shift) != (unsigned long long)latch)
		clc = ~0ULL;
	if ((~0ULL - clc > rnd) && (!ismax || evt->mult <= (1ULL << evt->shift)))
		clc += rnd;
	clc = __do_div64(clc, evt->mult);
	return clc > 1000 ? clc : 1000;
}
#endif

#line 250 "kernel/time/clockevents.c"
noinline void clockevents_register_device(struct clock_event_device *dev)
{
	unsigned long flags;
	if (dev->mode != CLOCK_EVT_MODE_UNUSED)
		__bug(__FILE__, __LINE__);
	flags = _raw_spin_lock_irqsave(&clockevents_lock);
	dev->next = clockevent_devices;
	clockevent_devices = dev;
	clockevents_notify_released();
	_raw_spin_unlock_irqrestore(&clockevents_lock, flags);
}

#if !V26
noinline void clockevents_calc_mult_shift(struct clock_event_device *dev, u32 freq, u32 maxsec)
{
	unsigned int sft = 32, mult = 0;
	unsigned long long tmp;
	while (sft > 0) {
		tmp = ((unsigned long long)freq << sft) + (NSEC_PER_SEC / 2);
		tmp = __do_div64(tmp, NSEC_PER_SEC);
		if ((tmp >> 32) == 0 && tmp * maxsec < (1ULL << 40))
			break;
		sft--;
	}
	mult = (unsigned int)tmp;
	dev->mult = mult;
	dev->shift = sft;
}

noinline void clockevents_config(struct clock_event_device *dev, u32 freq)
{
	unsigned long long sec;
	if (!(dev->features & CLOCK_EVT_FEAT_ONESHOT))
		return;
	sec = __do_div64(dev->max_delta_ticks, freq);
	if (!sec)
		sec = 1;
	else if (sec > 600 && dev->max_delta_ticks > 0xffffffffUL)
		sec = 600;
	clockevents_calc_mult_shift(dev, freq, (u32)sec);
	dev->min_delta_ns = cev_delta2ns(dev->min_delta_ticks, dev, false);
	dev->max_delta_ns = cev_delta2ns(dev->max_delta_ticks, dev, true);
}

noinline void clockevents_config_and_register(struct clock_event_device *dev, u32 freq, unsigned long min_delta, unsigned long max_delta)
{
	dev->min_delta_ticks = min_delta;
	dev->max_delta_ticks = max_delta;
	clockevents_config(dev, freq);
	clockevents_register_device(dev);
}

noinline int clockevents_update_freq(struct clock_event_device *dev, u32 freq)
{
	unsigned long flags;
	flags = _raw_spin_lock_irqsave(&clockevents_lock);
	clockevents_config(dev, freq);
	_raw_spin_unlock_irqrestore(&clockevents_lock, flags);
	return 0;
}
#endif

/* ---- drivers/of/base.c -------------------------------------------------------------- */

#if !V26
struct device_node *of_root;
struct device_node *of_chosen;
struct device_node *of_aliases;

static int of_node_name_eq(const char *a, const char *b)
{
	while (*a && *a == *b && *b != '/') {
		a++;
		b++;
	}
	return *a == 0 && (*b == 0 || *b == '/' || *b == ':');
}

#line 780 "drivers/of/base.c"
noinline struct device_node *__of_find_node_by_path(struct device_node *parent, const char *path)
{
	struct device_node *child;
	for (child = parent->child; child; child = child->sibling)
		if (of_node_name_eq(child->name, path))
			return child;
	return NULL;
}

#if LINUX_VERSION_CODE < KV(4, 14, 0)
noinline struct device_node *of_find_node_by_path(const char *path)
{
	struct device_node *np = of_root;
	unsigned long flags;
	if (!np || path[0] != '/')
		return NULL;
	flags = _raw_spin_lock_irqsave(&devtree_lock);
	while (np && *(++path) != 0) {
		np = __of_find_node_by_path(np, path);
		while (*path && *path != '/')
			path++;
	}
	_raw_spin_unlock_irqrestore(&devtree_lock, flags);
	return np;
}
#else
noinline struct device_node *of_find_node_opts_by_path(const char *path, const char **opts)
{
	struct device_node *np = of_root;
	const char *separator = path;
	unsigned long flags;
	while (*separator && *separator != ':')
		separator++;
	if (opts)
		*opts = *separator ? separator + 1 : NULL;
	if (!np || path[0] != '/')
		return NULL;
	flags = _raw_spin_lock_irqsave(&devtree_lock);
	while (np && *(++path) != 0) {
		np = __of_find_node_by_path(np, path);
		while (*path && *path != '/' && *path != ':')
			path++;
	}
	_raw_spin_unlock_irqrestore(&devtree_lock, flags);
	return np;
}

noinline struct device_node *of_find_node_by_path(const char *path)
{
	return of_find_node_opts_by_path(path, NULL);
}
#endif

noinline void of_alias_scan(void *(*dt_alloc)(unsigned long size, unsigned long align))
{
	of_aliases = of_find_node_by_path("/aliases");
	of_chosen = of_find_node_by_path("/chosen");
	if (of_chosen == NULL)
		of_chosen = of_find_node_by_path("/chosen@0");
	if (of_chosen) {
		const char *name = of_get_property(of_chosen, "stdout-path", NULL);
		if (!name)
			name = of_get_property(of_chosen, "linux,stdout-path", NULL);
		if (name)
			of_stdout = of_find_node_by_path(name);
	}
	if (!of_aliases)
		return;
	dt_alloc(64, 4);
}

static unsigned int cpu_logical_map[4];

noinline void arm_dt_init_cpu_maps(void)
{
	struct device_node *cpu, *cpus;
	unsigned int i = 0;
	cpus = of_find_node_by_path("/cpus");
	if (!cpus)
		return;
	for (cpu = cpus->child; cpu && i < 4; cpu = cpu->sibling) {
		const u32 *cell = of_get_property(cpu, "reg", NULL);
		if (!cell) {
			printk(KERN_ERR "%s: missing reg property\n", cpu->name);
			return;
		}
		cpu_logical_map[i++] = *cell & 0xffffff;
	}
	if (!i)
		printk(KERN_WARNING "DT missing boot CPU MPIDR[23:0], fall back to default cpu_logical_map\n");
}
#endif

/* ---- drivers/base/platform.c -------------------------------------------------------- */

#line 300 "drivers/base/platform.c"
noinline int platform_device_add(struct platform_device *pdev)
{
	int i, ret;
	if (!pdev)
		return -EINVAL;
	if (!pdev->dev.parent)
		pdev->dev.parent = &platform_bus;
	pdev->dev.bus = &platform_bus_type;
	if (pdev->id != -1)
		pdev->dev.init_name = pdev->name;
	for (i = 0; i < pdev->num_resources; i++) {
		struct resource *r = &pdev->resource[i];
		if (r->start > r->end) {
			printk(KERN_ERR "%s: failed to claim resource %d\n", pdev->name, i);
			ret = -EBUSY;
			goto failed;
		}
	}
	printk(KERN_DEBUG "Registering platform device '%s'. Parent at %s\n", pdev->name, pdev->dev.parent->init_name);
	ret = device_add(&pdev->dev);
	if (ret == 0)
		return ret;
failed:
	return ret;
}

noinline void device_initialize(struct device *dev)
{
	dev->kobj_refcount = 1;
	dev->parent = NULL;
	dev->bus = NULL;
	dev->dma_mask = 0xffffffffu;
}

noinline void arch_setup_pdev_archdata(struct platform_device *pdev)
{
	pdev->archdata = 0;
}

noinline int platform_device_register(struct platform_device *pdev)
{
	device_initialize(&pdev->dev);
	arch_setup_pdev_archdata(pdev);
	return platform_device_add(pdev);
}

noinline struct platform_device *platform_device_alloc(const char *name, int id)
{
	struct platform_device *pa = kzalloc(sizeof(*pa), GFP_KERNEL);
	if (pa) {
		pa->name = name;
		pa->id = id;
		device_initialize(&pa->dev);
	}
	return pa;
}

noinline struct platform_device *platform_device_register_full(const char *name, int id, struct resource *res, unsigned int num)
{
	struct platform_device *pdev = platform_device_alloc(name, id);
	int ret;
	if (!pdev)
		return ERR_PTR(-ENOMEM);
	pdev->resource = res;
	pdev->num_resources = num;
	ret = platform_device_add(pdev);
	if (ret) {
		kfree(pdev);
		return ERR_PTR(ret);
	}
	return pdev;
}

/* ---- arch/arm/kernel/setup.c, devtree.c --------------------------------------------- */

extern struct machine_desc __arch_info_begin[], __arch_info_end[];
unsigned int __machine_arch_type;
const struct machine_desc *machine_desc;

noinline void dump_machine_table(void)
{
	const struct machine_desc *p;
	early_print("Available machine support:\n\nID (hex)\tNAME\n");
	for (p = __arch_info_begin; p < __arch_info_end; p++)
		early_print("%08x\t%s\n", p->nr, p->name);
	early_print("\nPlease check your kernel config and/or bootloader.\n");
	for (;;)
		;
}

#if V26
#line 400 "arch/arm/kernel/setup.c"
noinline struct machine_desc *lookup_machine_type(unsigned int type)
{
	struct machine_desc *p;
	for (p = __arch_info_begin; p < __arch_info_end; p++)
		if (type == p->nr)
			return p;
	early_print("\nError: unrecognized/unsupported machine ID (r1 = 0x%08x).\n\n", type);
	dump_machine_table();
	return NULL;
}
#else
static const void *initial_boot_params;

noinline bool early_init_dt_verify(void *params)
{
	if (!params || *(u32 *)params != 0xedfe0dd0)
		return false;
	initial_boot_params = params;
	return true;
}

noinline const struct machine_desc *of_flat_dt_match_machine(const struct machine_desc *best, const void *(*get_next)(const char *const **))
{
	const char *const *compat;
	const void *data = NULL;
	const void *p;
	while ((p = get_next(&compat)))
		if (compat && *compat)
			data = p;
	if (!data)
		return best;
	printk(KERN_INFO "Machine model: %s\n", ((const struct machine_desc *)data)->name);
	return data;
}

static const void *arch_get_next_mach(const char *const **match)
{
	static const struct machine_desc *mdesc = __arch_info_begin;
	const struct machine_desc *m = mdesc;
	if (m >= __arch_info_end)
		return NULL;
	mdesc++;
	*match = m->dt_compat;
	return m;
}

noinline void early_init_dt_scan_nodes(void)
{
	printk(KERN_DEBUG "OF: fdt: scanning nodes\n");
}

#line 220 "arch/arm/kernel/devtree.c"
noinline const struct machine_desc *setup_machine_fdt(unsigned int dt_phys)
{
	const struct machine_desc *mdesc, *mdesc_best = NULL;
	if (!dt_phys || !early_init_dt_verify(phys_to_virt(dt_phys)))
		return NULL;
	mdesc = of_flat_dt_match_machine(mdesc_best, arch_get_next_mach);
	if (!mdesc) {
		early_print("\nError: unrecognized/unsupported device tree compatible list:\n[ ");
		early_print("'%s' ", "unknown");
		early_print("]\n\n");
		dump_machine_table();
	}
	if (mdesc->dt_fixup)
		mdesc->dt_fixup();
	early_init_dt_scan_nodes();
	__machine_arch_type = mdesc->nr;
	return mdesc;
}

#line 900 "arch/arm/kernel/atags_parse.c"
noinline const struct machine_desc *setup_machine_tags(unsigned int nr)
{
	const struct machine_desc *mdesc = NULL, *p;
	for (p = __arch_info_begin; p < __arch_info_end; p++)
		if (nr == p->nr) {
			printk("Machine: %s\n", p->name);
			mdesc = p;
			break;
		}
	if (!mdesc) {
		early_print("\nError: unrecognized/unsupported machine ID (r1 = 0x%08x).\n\n", nr);
		dump_machine_table();
	}
	return mdesc;
}
#endif

unsigned int __atags_pointer;
unsigned int __machine_type_from_boot;

#line 900 "arch/arm/kernel/setup.c"
noinline void setup_arch(char **cmdline_p)
{
	const struct machine_desc *mdesc;
#if V26
	mdesc = lookup_machine_type(__machine_type_from_boot);
	if (!mdesc)
		panic("Machine configuration botched (nr %d), unable to continue.\n");
	printk("Machine: %s\n", mdesc->name);
#else
	mdesc = setup_machine_fdt(__atags_pointer);
	if (!mdesc)
		mdesc = setup_machine_tags(__machine_type_from_boot);
#endif
	machine_desc = mdesc;
	*cmdline_p = "console=ttyS0";
#if !V26
	unflatten_device_tree();
	arm_dt_init_cpu_maps();
#endif
}

noinline void init_IRQ(void)
{
	machine_desc->init_irq();
}

noinline void time_init(void)
{
#if V26
	machine_desc->timer->init();
#else
	machine_desc->init_time();
#endif
}

/* ---- a board ------------------------------------------------------------------------ */

#line 10 "arch/arm/mach-fixture/core.c"
static struct irq_chip board_irq_chip = { .name = "FIXTURE-INTC" };
static void *board_intc_base;
static struct clock_event_device board_clkevt = { .name = "fixture-timer", .features = 3 };
static struct irqaction board_timer_irq = { .name = "fixture-timer" };

static irqreturn_t board_timer_interrupt(int irq, void *dev_id)
{
	struct clock_event_device *evt = dev_id;
	evt->event_handler(evt);
	return IRQ_HANDLED;
}

#if !V26
static int board_irq_map(struct irq_domain *d, unsigned int irq, irq_hw_number_t hw)
{
	irq_set_chip_and_handler(irq, &board_irq_chip, handle_level_irq);
	irq_set_chip_data(irq, d->host_data);
#if V44_PLUS
	irq_modify_status(irq, IRQ_NOREQUEST | IRQ_NOPROBE, 0);
#else
	set_irq_flags(irq, IRQF_VALID | IRQF_PROBE);
#endif
	return 0;
}

static const struct irq_domain_ops board_irq_ops = {
	.map = board_irq_map,
	.xlate = irq_domain_xlate_onetwocell,
};

static struct irq_domain *board_domain;

static void board_handle_irq(struct pt_regs *regs)
{
	u32 stat;
	while ((stat = *(volatile u32 *)board_intc_base) != 0)
		__handle_domain_irq(board_domain, __builtin_ctz(stat), true, regs);
}
#endif

static void board_init_irq(void)
{
#if V26
	unsigned int irq;
	for (irq = 0; irq < 32; irq++) {
		set_irq_chip_and_handler(irq, &board_irq_chip, handle_level_irq);
		irq_set_chip_data(irq, board_intc_base);
		set_irq_flags(irq, IRQF_VALID | IRQF_PROBE);
	}
#else
	board_domain = irq_domain_add_simple(NULL, 32, 0, &board_irq_ops, board_intc_base);
	set_handle_irq(board_handle_irq);
#endif
}

static int board_set_next_event(unsigned long next, struct clock_event_device *evt)
{
	*(volatile u32 *)board_intc_base = next;
	return 0;
}

static void board_timer_init(void)
{
	board_timer_irq.handler = board_timer_interrupt;
	board_timer_irq.dev_id = &board_clkevt;
	board_clkevt.set_next_event = board_set_next_event;
#if V26
	board_clkevt.mult = 0x20c49ba;
	board_clkevt.shift = 32;
	board_clkevt.max_delta_ns = clockevent_delta2ns(0xffffffff, &board_clkevt);
	board_clkevt.min_delta_ns = clockevent_delta2ns(0xf, &board_clkevt);
	setup_irq(5, &board_timer_irq);
	clockevents_register_device(&board_clkevt);
#else
	setup_irq(irq_create_mapping(board_domain, 5), &board_timer_irq);
	clockevents_config_and_register(&board_clkevt, 1000000, 0xf, 0xffffffff);
#endif
}

#if V26
static struct sys_timer board_timer = { .init = board_timer_init };
#endif

static struct resource board_uart_resources[] = {
	{ .start = 0x101f1000, .end = 0x101f1fff, .flags = 0x200 },
	{ .start = 12, .end = 12, .flags = 0x400 },
};

static struct platform_device board_uart_device = {
	.name = "fixture-uart",
	.id = -1,
	.num_resources = 2,
	.resource = board_uart_resources,
};

static void board_init_machine(void)
{
	platform_device_register(&board_uart_device);
	platform_device_register_full("fixture-rtc", 0, NULL, 0);
}

#if !V26
static const char *const board_dt_compat[] = { "fixture,board", NULL };
#endif

__attribute__((used, section(".arch.info.init"))) struct machine_desc board_desc = {
	.nr = 0x8e0,
	.name = "Fixture Board",
#if V26
	.init_irq = board_init_irq,
	.timer = &board_timer,
#else
	.dt_compat = board_dt_compat,
	.init_irq = board_init_irq,
	.init_time = board_timer_init,
#endif
	.init_machine = board_init_machine,
};

/* ---- init/main.c -------------------------------------------------------------------- */

extern void filler_init(void);

noinline void start_kernel(void)
{
	char *command_line;
	printk(KERN_NOTICE "%s", linux_banner);
	setup_arch(&command_line);
	printk(KERN_NOTICE "Kernel command line: %s\n", command_line);
	init_IRQ();
	time_init();
	machine_desc->init_machine();
	request_threaded_irq(7, NULL, NULL, 0, "fixture", NULL);
	free_irq(7, NULL);
	enable_irq(7);
	disable_irq_nosync(7);
	asm_do_IRQ(7, NULL);
#if V26
	set_irq_data(3, NULL);
	set_irq_type(3, 1);
#else
	irq_set_handler_data(3, NULL);
	irq_set_irq_type(3, 1);
	irq_set_handler(4, handle_edge_irq);
	irq_set_chained_handler(5, handle_fasteoi_irq);
	irq_set_handler(6, handle_simple_irq);
	irq_domain_add_legacy(NULL, 16, 32, 0, &board_irq_ops, NULL);
	clockevents_update_freq(&board_clkevt, 32768);
#if V44_PLUS
	irq_domain_xlate_onecell(NULL, NULL, NULL, 1, NULL, NULL);
	irq_domain_xlate_twocell(NULL, NULL, NULL, 2, NULL, NULL);
#endif
#endif
#if V26
	set_irq_handler(8, handle_edge_irq);
	set_irq_handler(9, handle_fasteoi_irq);
	set_irq_handler(10, handle_simple_irq);
#endif
	filler_init();
	panic("Attempted to kill init!");
}

__attribute__((naked, section(".text.head"))) void _start(void)
{
	__asm__ volatile("ldr sp, =__stack_top\n\tbl start_kernel\n\tb .\n");
}
