from typing import Dict, Any, Optional
import logging
import os
import tomli  # For reading TOML files


class ConfigManager:
    """
    Singleton configuration manager that loads and provides access to the
    EDF defaults.

    Loads configuration from TOML files and provides a centralized access point
    for hyperparameter defaults, logging settings and output formatting.
    """
    _instance = None
    _config = None
    _source = None

    @classmethod
    def get_config(cls, config_file: Optional[str] = None) -> Dict[str, Any]:
        """
        Get the configuration, loading it if necessary. Creates the singleton instance
        if it doesn't exist yet.

        Args:
            config_file (Optional[str]): Path to configuration file

        Returns:
            Dict[str, Any]: Configuration dictionary
        """
        # Return cached config if available
        if cls._config is not None and (config_file is None or config_file == cls._source):
            return cls._config

        # Create singleton instance if needed
        if cls._instance is None:
            cls._instance = cls()

        config: Dict[str, Any] = {}
        source = None

        # Default config file paths to try
        config_paths = [
            config_file,  # User-specified path
            "config.toml",  # Current directory
            os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config.toml"),  # Repo root
            os.path.join(os.path.dirname(__file__), "config.toml"),  # Module directory
            os.path.expanduser("~/.config/edf_fair/config.toml")  # User config directory
        ]

        # stdout is reserved for result artifacts, so report through logging only
        logger = logging.getLogger(__name__)
        for path in config_paths:
            if path and os.path.isfile(path):
                try:
                    with open(path, "rb") as f:
                        config = tomli.load(f)
                    source = path
                    logger.debug(f"Loaded configuration from {path}")
                    break
                except (OSError, tomli.TOMLDecodeError) as e:
                    logger.warning(f"Error loading config from {path}: {e}")

        cls._config = config
        cls._source = source if config_file is None else config_file
        return config

    @classmethod
    def reset(cls) -> None:
        """Drop the cached configuration so the next call reloads from disk."""
        cls._config = None
        cls._source = None

    @staticmethod
    def section(config: Dict[str, Any], *path: str) -> Dict[str, Any]:
        """
        Walk nested tables, returning an empty dict for any missing level.

        Args:
            config (Dict[str, Any]): Configuration dictionary
            *path (str): Table names, e.g. ("EdfFair", "Forest")

        Returns:
            Dict[str, Any]: The nested table or {}
        """
        node: Any = config
        for key in path:
            node = node.get(key, {}) if isinstance(node, dict) else {}
        return node if isinstance(node, dict) else {}
