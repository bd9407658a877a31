from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict
import logging

from pydantic import ValidationError

from core.errors import SoftRasError
from core.mesh import Mesh, load_obj
from core.shapes import BUILTIN_SHAPES, builtin_mesh

# 1: numerical or validation failure, 2: I/O or argument error
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class BaseCommand(ABC):
    """Base class for all commands of the soft rasterizer CLI"""

    def __init__(self, name: str, description: str):
        self.name = name
        self.description = description
        self.logger = logging.getLogger(f"command.{name}")

    @abstractmethod
    async def execute(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        """Execute the command's main functionality"""
        pass

    def log_execution(self, input_data: Dict[str, Any], output_data: Dict[str, Any], execution_time: float):
        """Log command execution for debugging and audit"""
        self.logger.info(f"Command {self.name} executed in {execution_time:.2f}s")
        self.logger.debug(f"Input: {input_data}")
        self.logger.debug(f"Output: {output_data}")

    def validate_input(self, input_data: Dict[str, Any], required_fields: list[str]) -> bool:
        """Validate that required fields are present in input data"""
        missing_fields = [field for field in required_fields if input_data.get(field) is None]
        if missing_fields:
            self.logger.error(f"Missing required fields: {missing_fields}")
            return False
        return True

    @staticmethod
    def option(input_data: Dict[str, Any], key: str, default: Any) -> Any:
        """Input value, or the default when it was not given; explicit zeros pass through to validation"""
        value = input_data.get(key)
        return default if value is None else value

    def load_mesh(self, source: str) -> Mesh:
        """Built-in shape name or path to an OBJ file"""
        if source in BUILTIN_SHAPES:
            self.logger.debug(f"Using built-in shape {source}")
            return builtin_mesh(source)
        return load_obj(Path(source))

    def create_error_response(
        self,
        error_message: str,
        error_code: str = "COMMAND_ERROR",
        exit_code: int = EXIT_FAILURE,
    ) -> Dict[str, Any]:
        """Create standardized error response"""
        return {
            "success": False,
            "error": {
                "code": error_code,
                "message": error_message,
                "command": self.name
            },
            "exit_code": exit_code
        }

    def create_success_response(self, data: Dict[str, Any]) -> Dict[str, Any]:
        """Create standardized success response"""
        return {
            "success": True,
            "command": self.name,
            "data": data,
            "exit_code": EXIT_OK
        }

    def handle_exception(self, error: Exception) -> Dict[str, Any]:
        """Map a raised error onto an error response and its exit code"""
        self.logger.error(f"Error in {self.name}: {error}")
        if isinstance(error, SoftRasError):
            return self.create_error_response(str(error), error.error_code, error.exit_code)
        if isinstance(error, ValidationError):
            return self.create_error_response(str(error), "VALIDATION_ERROR", EXIT_FAILURE)
        if isinstance(error, OSError):
            return self.create_error_response(str(error), "IO_ERROR", EXIT_USAGE)
        if isinstance(error, (KeyError, ValueError)):
            return self.create_error_response(str(error), "ARGUMENT_ERROR", EXIT_USAGE)
        return self.create_error_response(str(error), "UNEXPECTED_ERROR", EXIT_FAILURE)
