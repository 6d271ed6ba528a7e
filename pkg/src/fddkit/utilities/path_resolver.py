import os
import sys
from typing import List


class PathResolver:
    @staticmethod
    def get_home_dir():
        """Get the base .fddkit directory path"""
        return os.path.expanduser("~/.fddkit")

    @staticmethod
    def get_user_config_path():
        """Get the path of the user's default scenario configuration"""
        return os.path.join(PathResolver.get_home_dir(), "config.yaml")

    @staticmethod
    def _bundled(name):
        try:
            # Bundled resources when frozen with PyInstaller
            return os.path.join(sys._MEIPASS, name)
        except Exception:
            return os.path.join(os.path.dirname(os.path.dirname(__file__)), name)

    @staticmethod
    def get_presets_dir():
        """Get the path to the shipped scenario presets"""
        return PathResolver._bundled("presets")

    @staticmethod
    def get_templates_dir():
        """Get the path to the report templates"""
        return PathResolver._bundled("templates")

    @staticmethod
    def list_presets() -> List[str]:
        presets_dir = PathResolver.get_presets_dir()
        if not os.path.isdir(presets_dir):
            return []
        return sorted(name[:-5] for name in os.listdir(presets_dir) if name.endswith(".yaml"))

    @staticmethod
    def resolve_config(name_or_path=None):
        """Resolve --config: an existing file, a preset name, or the user/default config when empty"""
        if name_or_path:
            if os.path.isfile(name_or_path):
                return name_or_path
            preset = os.path.join(PathResolver.get_presets_dir(), f"{name_or_path}.yaml")
            if os.path.isfile(preset):
                return preset
            return None
        user_config = PathResolver.get_user_config_path()
        if os.path.isfile(user_config):
            return user_config
        return os.path.join(PathResolver.get_presets_dir(), "default.yaml")
