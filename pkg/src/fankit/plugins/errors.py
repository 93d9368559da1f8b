from fankit.vm.errors import BadHostCall


class PluginError(Exception):
    pass


class MalformedMemoryLine(PluginError):
    pass


class MalformedEntryLine(PluginError):
    pass


class UnknownOperation(PluginError):
    pass


class DuplicateReplace(PluginError):
    def __init__(self, hook):
        self.hook = hook
        super().__init__(f"hook {hook!r} is replaced more than once")


class InvalidPluginName(PluginError):
    pass


class UnknownHook(PluginError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"hook {name!r} is not published by the host")


class ValidationFailed(PluginError):
    def __init__(self, filename, reason):
        self.filename = filename
        super().__init__(f"{filename}: {reason}")


class BudgetRejected(PluginError):
    pass


class ReplaceConflict(PluginError):
    pass


class GateDenied(PluginError):
    def __init__(self, reason):
        self.reason = reason
        super().__init__(f"load gate denied plugin: {reason}")


# Raised from inside host calls, so they are VM traps and get contained.
class UnknownKey(BadHostCall):
    pass


class AccessDenied(BadHostCall):
    pass
