#!/usr/bin/env python3
"""Emit filler.c: a few thousand deterministic kernel-ish functions around the real ones.

The filler is there to make identification hard. It includes printk sites, WARN_ON sites
in the same files as the catalog targets, thin wrappers, irq_set_*-shaped setters and
functions that are only reachable through function pointer tables.
"""

import argparse
import random

SUBSYS = ["ext4", "nfs", "tcp", "udp", "usb", "mmc", "spi", "i2c", "gpio", "pinctrl", "clk",
          "regmap", "dma", "vfs", "sched", "rcu", "kobj", "sysfs", "proc", "blk", "scsi",
          "net", "skb", "sock", "tty", "serial", "input", "hid", "snd", "pcm", "fb", "drm",
          "pm", "cpufreq", "cpuidle", "timer", "hrtimer", "workqueue", "kthread", "mm", "slab",
          "vmalloc", "page", "swap", "crypto", "sha", "aes", "key", "audit", "sec", "mtd",
          "ubi", "jffs2", "squashfs", "fat", "vfat", "devres", "firmware", "of", "irqchip"]
VERB = ["get", "put", "set", "clear", "find", "alloc", "free", "init", "exit", "probe",
        "remove", "read", "write", "update", "flush", "sync", "lock", "unlock", "enable",
        "disable", "start", "stop", "attach", "detach", "map", "unmap", "scan", "parse",
        "check", "validate", "register", "unregister", "queue", "dequeue", "poll", "wake"]
NOUN = ["node", "entry", "buffer", "page", "block", "inode", "dentry", "request", "queue",
        "table", "range", "region", "resource", "device", "driver", "state", "config",
        "stats", "slot", "chan", "desc", "ring", "frame", "packet", "cache", "list", "map",
        "bitmap", "mask", "work", "event", "handler", "ctx", "ops", "info", "data"]
WORDS = ["invalid", "failed", "cannot", "unable", "timeout", "waiting", "for", "device",
         "bad", "value", "state", "already", "registered", "missing", "resource", "reset",
         "controller", "interrupt", "irq", "buffer", "overflow", "out", "of", "memory",
         "mapping", "domain", "clock", "event", "handler", "allocate", "descriptor", "chip",
         "node", "property", "found", "not", "supported", "request", "retry", "channel"]
WARN_FILES = ["kernel/irq/manage.c", "kernel/irq/chip.c", "kernel/irq/irqdomain.c",
              "kernel/irq/irqdesc.c", "kernel/time/clockevents.c", "drivers/of/base.c",
              "kernel/sched/core.c", "mm/slab.c", "fs/ext4/inode.c", "net/core/dev.c",
              "kernel/workqueue.c", "drivers/base/core.c", "lib/list_debug.c", "mm/page_alloc.c"]

PROTOTYPES = """\
typedef unsigned int u32;
typedef unsigned long size_t;
#define NULL ((void *)0)
#define noinline __attribute__((noinline))
int printk(const char *fmt, ...);
void warn_slowpath_null(const char *file, int line);
void warn_slowpath_fmt(const char *file, int line, const char *fmt, ...);
unsigned long _raw_spin_lock_irqsave(void *lock);
void _raw_spin_unlock_irqrestore(void *lock, unsigned long flags);
void _raw_spin_lock(void *lock);
void _raw_spin_unlock(void *lock);
void *__kmalloc(size_t size, unsigned int flags);
void kfree(const void *p);
unsigned long long __do_div64(unsigned long long n, unsigned int base);
void *irq_to_desc(unsigned int irq);
int generic_handle_irq(unsigned int irq);

struct fobj {
	unsigned int a, b, c, d;
	void *p, *q;
	unsigned int lock;
	unsigned int flags;
	unsigned int count;
	unsigned int tbl[16];
};
"""


class Gen:
    def __init__(self, rng, count):
        self.rng = rng
        self.count = count
        self.names = []
        self.used = set()
        self.lines = []

    def name(self):
        while True:
            n = "%s_%s_%s" % (self.rng.choice(SUBSYS), self.rng.choice(VERB), self.rng.choice(NOUN))
            if self.rng.random() < 0.3:
                n = "__" + n
            if n not in self.used:
                self.used.add(n)
                return n

    def message(self, with_fmt=True):
        words = self.rng.sample(WORDS, self.rng.randint(3, 7))
        msg = " ".join(words)
        if with_fmt and self.rng.random() < 0.6:
            msg += " %d"
        return msg

    def callee(self, idx):
        # only call earlier functions so the call graph is a DAG
        if idx == 0:
            return None
        return self.names[self.rng.randrange(max(0, idx - 200), idx)]

    def emit(self, text):
        self.lines.append(text)

    def body(self, idx, name):
        r = self.rng
        kind = r.choices(
            ["leaf", "printk", "warn", "setter", "wrapper", "switch", "loop", "errpath", "divide", "irqwalk"],
            weights=[14, 14, 8, 8, 10, 8, 12, 12, 4, 6])[0]
        sig = "noinline int %s(struct fobj *o, unsigned int x)" % name
        c1, c2 = self.callee(idx), self.callee(idx)
        call1 = "%s(o, x + %d)" % (c1, r.randint(1, 9)) if c1 else "printk(\"%s\\n\")" % self.message(False)
        call2 = "%s(o->p, %d)" % (c2, r.randint(0, 99)) if c2 else "0"
        if c2:
            call2 = "%s(o, %d)" % (c2, r.randint(0, 99))
        k = r.randint(1, 255)
        if kind == "leaf":
            ops = r.choice(["+", "^", "|", "-"])
            return "%s\n{\n\treturn (int)((o->a %s x) * %d + o->tbl[x & 15]);\n}\n" % (sig, ops, k)
        if kind == "printk":
            lvl = r.choice(["\\0013", "\\0014", "\\0016", "\\0017", ""])
            return ("%s\n{\n\tif (o->flags & 0x%x) {\n\t\tprintk(\"%s%s\\n\", x);\n\t\treturn -%d;\n\t}\n"
                    "\to->count += x;\n\treturn %s;\n}\n") % (
                sig, 1 << r.randint(0, 15), lvl, self.message(), r.choice([5, 12, 16, 19, 22]), call1)
        if kind == "warn":
            f = r.choice(WARN_FILES)
            line = r.randint(30, 2400)
            return ("%s\n{\n\tif (__builtin_expect(x > %d, 0)) {\n\t\twarn_slowpath_null(\"%s\", %d);\n"
                    "\t\treturn -22;\n\t}\n\treturn %s;\n}\n") % (sig, k, f, line, call1)
        if kind == "setter":
            field = r.choice(["p", "q", "a", "b", "c", "d"])
            val = "(void *)(unsigned long)x" if field in "pq" else "x"
            return ("%s\n{\n\tunsigned long flags;\n\tstruct fobj *d = irq_to_desc(x);\n\tif (!d)\n\t\treturn -22;\n"
                    "\tflags = _raw_spin_lock_irqsave(&d->lock);\n\td->%s = %s;\n"
                    "\t_raw_spin_unlock_irqrestore(&d->lock, flags);\n\treturn 0;\n}\n") % (sig, field, val)
        if kind == "wrapper":
            return "%s\n{\n\t%s;\n\treturn %s;\n}\n" % (sig, call1, call2)
        if kind == "switch":
            cases = "".join("\tcase %d:\n\t\treturn %s;\n" % (i, r.choice(["o->a", "o->b + x", "-22", "-12", str(r.randint(0, 99))]))
                            for i in range(r.randint(3, 8)))
            return "%s\n{\n\tswitch (x) {\n%s\tdefault:\n\t\treturn %s;\n\t}\n}\n" % (sig, cases, call1)
        if kind == "loop":
            return ("%s\n{\n\tunsigned int i, s = 0;\n\tfor (i = 0; i < (x & 15); i++)\n\t\ts += o->tbl[i] ^ %d;\n"
                    "\tif (s > %d)\n\t\treturn %s;\n\treturn (int)s;\n}\n") % (sig, k, r.randint(100, 5000), call1)
        if kind == "errpath":
            msg = self.message()
            return ("%s\n{\n\tvoid *buf = __kmalloc(%d, 0xd0);\n\tint ret;\n\tif (!buf)\n\t\treturn -12;\n"
                    "\tret = %s;\n\tif (ret < 0) {\n\t\tprintk(\"\\0013%s\\n\", ret);\n\t\tkfree(buf);\n\t\treturn ret;\n\t}\n"
                    "\to->p = buf;\n\treturn 0;\n}\n") % (sig, r.choice([16, 32, 64, 128, 256]), call1, msg)
        if kind == "divide":
            return ("%s\n{\n\tunsigned long long v = (unsigned long long)o->a << %d;\n"
                    "\treturn (int)__do_div64(v, x | 1);\n}\n") % (sig, r.randint(1, 31))
        return ("%s\n{\n\tunsigned int i;\n\tint n = 0;\n\tfor (i = x; i < x + %d; i++)\n"
                "\t\tif (irq_to_desc(i))\n\t\t\tn += generic_handle_irq(i) == 0;\n\treturn n;\n}\n") % (sig, r.randint(2, 8))

    def generate(self):
        self.emit(PROTOTYPES)
        for i in range(self.count):
            n = self.name()
            self.names.append(n)
            self.emit(self.body(i, n))
        # a third of the roots are called directly, the rest only sit in ops tables
        roots = self.names[-self.count // 4:]
        direct = [n for n in roots if self.rng.random() < 0.35]
        indirect = [n for n in self.names if n not in direct and self.rng.random() < 0.2]
        self.emit("typedef int (*fop)(struct fobj *, unsigned int);")
        self.emit("const fop filler_ops[] = {\n%s\n};" % ",\n".join("\t" + n for n in indirect))
        self.emit("static struct fobj fobj_state;")
        body = "".join("\t%s(&fobj_state, %d);\n" % (n, i) for i, n in enumerate(direct))
        self.emit("noinline void filler_init(void)\n{\n\tunsigned int i;\n%s"
                  "\tfor (i = 0; i < sizeof(filler_ops) / sizeof(filler_ops[0]); i++)\n"
                  "\t\tfiller_ops[i](&fobj_state, i);\n}\n" % body)
        return "\n".join(self.lines)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--count", type=int, default=1500)
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args()
    text = Gen(random.Random(args.seed), args.count).generate()
    with open(args.output, "w") as f:
        f.write(text)


if __name__ == "__main__":
    main()
