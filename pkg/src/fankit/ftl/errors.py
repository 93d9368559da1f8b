class FtlError(Exception):
    pass


class InvalidSignature(FtlError):
    def __init__(self, name):
        super().__init__(f"signature check failed for {name!r}")
        self.name = name


class DuplicateName(FtlError):
    def __init__(self, name):
        super().__init__(f"plugin {name!r} already issued")
        self.name = name


class NotPresent(FtlError):
    def __init__(self, name):
        super().__init__(f"plugin {name!r} is not in the tree")
        self.name = name


class PresentSomewhere(FtlError):
    def __init__(self, ftl_id, name):
        super().__init__(f"plugin {name!r} is live in log {ftl_id!r}")
        self.ftl_id = ftl_id
        self.name = name


class EpochError(FtlError):
    """Epoch ordering violated (regression, or E_protest > E_push)."""


class UnknownPlugin(FtlError):
    def __init__(self, name):
        super().__init__(f"no issuance order for {name!r}")
        self.name = name


class DecodeError(FtlError):
    pass
