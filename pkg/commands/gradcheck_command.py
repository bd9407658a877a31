import asyncio
import time
from typing import Any, Dict

from utils.gradcheck import run_gradcheck
from .base_command import BaseCommand, EXIT_FAILURE


class GradcheckCommand(BaseCommand):
    """Finite-difference verification of the rasterizer gradients"""

    def __init__(self):
        super().__init__(
            name="gradcheck",
            description="Compares analytic vertex gradients against central differences on random triangles."
        )

    async def execute(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        try:
            start_time = time.time()
            loop = asyncio.get_running_loop()
            report = await loop.run_in_executor(
                None, run_gradcheck, input_data.get("trials"), input_data.get("seed")
            )

            result = {
                "trials": report.trials,
                "rejected": report.rejected,
                "max_relative_error": report.max_relative_error,
                "worst_trial": report.worst_trial,
                "tolerance": report.tolerance,
                "passed": report.passed,
                "summary": report.summary(),
            }
            self.log_execution(input_data, result, time.time() - start_time)
            if not report.passed:
                response = self.create_error_response(report.summary(), "GRADCHECK_FAILED", EXIT_FAILURE)
                response["data"] = result
                return response
            return self.create_success_response(result)

        except Exception as e:
            return self.handle_exception(e)
