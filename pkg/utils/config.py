from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field
from typing import Optional
from dotenv import load_dotenv

# Load .env file
load_dotenv()

class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="OCCLUSION_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        protected_namespaces=(),
    )

    # Logging Configuration
    log_level: str = Field(default="INFO")
    log_file: Optional[str] = Field(default="occlusion_edges")
    log_dir: str = Field(default="logs")
    log_max_bytes: int = Field(default=10 * 1024 * 1024)  # 10MB
    log_backup_count: int = Field(default=5)
    log_console_output: bool = Field(default=True)

    # Execution
    threads: int = Field(default=0, ge=0)  # 0 = hardware parallelism
    deterministic: bool = Field(default=False)

    # Inference API
    model_path: Optional[str] = Field(default=None)
    stats_path: Optional[str] = Field(default=None)
    api_default_stride: int = Field(default=8, ge=1, le=32)
    api_output_dir: str = Field(default="api_outputs")

_settings: Optional[Settings] = None

def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings

def reset_settings() -> None:
    """Drop the cached settings (tests patch the environment between cases)."""
    global _settings
    _settings = None
