"""
Hooks, plugins and dispatch
===========================

A host publishes named hooks. Plugins attach bytecode to them, either
alongside the default behaviour (``add``) or instead of it (``replace``).
"""

from fankit.plugins import builtin_bundle, hooks
from fankit.plugins.bench import host_manager, measure_load

mgr = host_manager()
hello = builtin_bundle("hello_world")
print(hello.to_text())

ctx = mgr.load(hello)
mgr.dispatch(hooks.CIRCUIT_OPEN, {})
print("plugin log:", mgr.logs)
mgr.unload(ctx)

# the dropmark defense: six entry points, one of them a replace
dm = builtin_bundle("dropmark_def")
print(dm.to_text())
ctx = mgr.load(dm)
padding_hook = mgr.registry.hook(hooks.CIRCPAD_SEND_PADDING_CALLBACK)
print("padding hook replaced by", mgr.registry.table[padding_hook.id][0].ctx.name)
mgr.unload(ctx)

# loading is cheap, and cheaper again once the decoded programs are cached
for name in ("hello_world", "dropmark_def"):
    r = measure_load(builtin_bundle(name), reps=30)
    print(f"{name:14s} cold {r.cold.median_us:7.1f} us   cached {r.cached.median_us:7.1f} us")
