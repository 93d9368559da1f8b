"""Plugin descriptors, hook registry and dispatch."""

from . import hooks
from .builtin import BUNDLES, TABLE1_BUNDLES, builtin_bundle, plugin_assembler
from .descriptor import (
    EntryPointSpec,
    PluginDescriptor,
    format_plugin_file,
    load_bundle,
    parse_plugin_file,
    write_bundle,
)
from .errors import (
    AccessDenied,
    BudgetRejected,
    DuplicateReplace,
    GateDenied,
    InvalidPluginName,
    MalformedEntryLine,
    MalformedMemoryLine,
    PluginError,
    ReplaceConflict,
    UnknownHook,
    UnknownKey,
    UnknownOperation,
    ValidationFailed,
)
from .manager import (
    ALL_FIELDS,
    Attachment,
    FaultRecord,
    HookRegistry,
    HostServices,
    LogRecord,
    PluginContext,
    PluginManager,
)


def load_plugin(desc, manager):
    return manager.load(desc)


def unload_plugin(ctx, manager):
    manager.unload(ctx)


def dispatch(manager, hook, args=None):
    return manager.dispatch(hook, args)
