from importlib.metadata import PackageNotFoundError, version

from fddkit.utilities.messenger import Messenger

FALLBACK_VERSION = "0.1.0"


class VersionCommand:
    def __init__(self):
        self.messenger = Messenger()

    def run(self):
        """Print the installed fddkit version"""
        self.messenger.sweet(f"fddkit version: {self.get_version()}")

    def get_version(self):
        try:
            return version("fddkit-cli")
        except PackageNotFoundError:
            return FALLBACK_VERSION
