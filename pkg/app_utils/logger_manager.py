from typing import Dict, Any, Optional
import logging
import os
import threading
from logging.handlers import RotatingFileHandler


class LoggingManager:
    """
    Centralized logging configuration manager.

    Configures loggers for different components of the application based on
    configuration settings. Console output always goes to stderr: the CLI
    keeps stdout for result artifacts.
    """

    # Dictionary to keep track of configured loggers
    _configured_loggers: Dict[str, logging.Logger] = {}
    # Level forced by set_level for loggers created later
    _level_override: Optional[int] = None
    # Guards the two attributes above; harness worker threads create loggers concurrently
    _lock = threading.Lock()

    @staticmethod
    def get_logger(logger_name: str, config: Dict[str, Any], log_level: Optional[int] = None) -> logging.Logger:
        """
        Get a configured logger for a component.

        Args:
            logger_name (str): Name of the logger
            config (Dict[str, Any]): Configuration dictionary
            log_level (Optional[int]): Override logging level

        Returns:
            logging.Logger: Configured logger
        """
        with LoggingManager._lock:
            # Check if logger was already configured
            if logger_name in LoggingManager._configured_loggers:
                logger = LoggingManager._configured_loggers[logger_name]
                if log_level is not None:
                    logger.setLevel(log_level)
                return logger

            log_config = config.get("Logging", {})

            # Determine log level
            if log_level is None:
                log_level = LoggingManager._level_override
            if log_level is None:
                log_level_str = log_config.get("level", "WARNING")
                log_level = getattr(logging, log_level_str) if isinstance(log_level_str, str) else log_level_str

            # Get or create logger
            logger = logging.getLogger(logger_name)
            logger.setLevel(log_level)
            logger.propagate = False

            # Clear existing handlers to avoid duplicates
            if logger.handlers:
                logger.handlers.clear()

            # Configure console handler
            if log_config.get("console_output", True):
                console_handler = logging.StreamHandler()  # stderr
                console_format = log_config.get("console_format",
                                            '%(asctime)s - %(name)s - %(levelname)s - %(message)s')
                console_handler.setFormatter(logging.Formatter(console_format))
                logger.addHandler(console_handler)

            # Configure rotating file handler if enabled
            if log_config.get("file_output", False):
                log_file = log_config.get("log_file", f"{logger_name.lower()}.log")
                log_dir = os.path.dirname(log_file)
                if log_dir:
                    os.makedirs(log_dir, exist_ok=True)
                file_handler = RotatingFileHandler(
                    log_file,
                    maxBytes=int(log_config.get("max_bytes", 5 * 1024 * 1024)),
                    backupCount=int(log_config.get("backup_count", 3)),
                )
                file_format = log_config.get("file_format",
                                        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s')
                file_handler.setFormatter(logging.Formatter(file_format))
                logger.addHandler(file_handler)

            # Store configured logger
            LoggingManager._configured_loggers[logger_name] = logger

            return logger

    @staticmethod
    def set_level(log_level: int) -> None:
        """
        Apply a level to every logger, configured so far or later (CLI --verbose).

        Args:
            log_level (int): Logging level
        """
        with LoggingManager._lock:
            LoggingManager._level_override = log_level
            for logger in LoggingManager._configured_loggers.values():
                logger.setLevel(log_level)

    @staticmethod
    def reset() -> None:
        """Detach handlers from every configured logger and forget them."""
        with LoggingManager._lock:
            for logger in LoggingManager._configured_loggers.values():
                for handler in list(logger.handlers):
                    logger.removeHandler(handler)
                    handler.close()
            LoggingManager._configured_loggers.clear()
            LoggingManager._level_override = None
