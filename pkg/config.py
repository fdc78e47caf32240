from dotenv import load_dotenv
import logging
import os

PARALLELISM_ENV = 'ROBUST_AM_PARALLELISM'
LP_MAX_ROWS_ENV = 'ROBUST_AM_LP_MAX_ROWS'
LOG_LEVEL_ENV = 'ROBUST_AM_LOG_LEVEL'

DEFAULT_PARALLELISM = 1
DEFAULT_LP_MAX_ROWS = 4096
DEFAULT_LOG_LEVEL = 'INFO'

class Config:
    _instance = None

    def __new__(cls):
        if not cls._instance:
            cls._instance = super(Config, cls).__new__(cls)
            cls._instance._initialize()
        return cls._instance

    def _initialize(self):
        load_dotenv()
        self.__init__()

    def __init__(self):
        """
        Initialize the configuration from the environment (and a `.env` file if present).
        """
        self.parallelism = self._validate_positive_int(PARALLELISM_ENV, DEFAULT_PARALLELISM)
        self.lp_max_rows = self._validate_positive_int(LP_MAX_ROWS_ENV, DEFAULT_LP_MAX_ROWS)
        self.log_level = self._validate_log_level()

    def _validate_positive_int(self, name: str, default: int) -> int:
        """
        Read a positive integer setting from the environment.

        Args:
            name (str): Environment variable name.
            default (int): Value used when the variable is unset or empty.

        Returns:
            int: The validated value.

        Raises:
            ValueError: If the value is not an integer or not positive.
        """
        raw = os.getenv(name)
        if raw is None or not raw.strip():
            return default

        try:
            value = int(raw.strip())
        except ValueError:
            raise ValueError(f"{name} must be an integer, got {raw!r}")

        if value < 1:
            raise ValueError(f"{name} must be at least 1, got {value}")

        return value

    def _validate_log_level(self) -> str:
        """
        Validate the logging level name.

        Returns:
            str: Upper-case level name understood by the logging module.

        Raises:
            ValueError: If the level name is unknown.
        """
        level = (os.getenv(LOG_LEVEL_ENV) or DEFAULT_LOG_LEVEL).strip().upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"{LOG_LEVEL_ENV} is not a valid logging level: {level!r}")
        return level

# Singleton instance for easy access
config = Config()
