import time
from typing import Any, Dict

from ablation_workflow import AblationWorkflow, Study
from utils.table_io import FLOAT_FORMAT
from .base_command import BaseCommand, EXIT_FAILURE

DEFAULT_ABLATION_ITERATIONS = 500
DEFAULT_ABLATION_SIZE = 32


class AblationCommand(BaseCommand):
    """Regularizer and view-coverage ablations"""

    def __init__(self):
        super().__init__(
            name="ablation",
            description="Fits the variants of an ablation study and reports their losses and IoUs."
        )

    async def execute(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        try:
            if not self.validate_input(input_data, ["study"]):
                return self.create_error_response("Missing required field: study", "ARGUMENT_ERROR", 2)

            start_time = time.time()
            study = Study(input_data["study"])
            iterations = input_data.get("iters")
            workflow = AblationWorkflow(
                iterations=DEFAULT_ABLATION_ITERATIONS if iterations is None else iterations,
                size=self.option(input_data, "size", DEFAULT_ABLATION_SIZE),
                truncate=bool(input_data.get("truncate", False)),
            )
            outcome = await workflow.run_study(study)

            report = outcome["report"]
            if input_data.get("out"):
                report.to_csv(input_data["out"], index=False, float_format=FLOAT_FORMAT)

            result = {
                "study": outcome["study"],
                "variants": report.to_dict(orient="records"),
                "failed_variants": outcome["failed_variants"],
                "out": input_data.get("out"),
            }
            self.log_execution(input_data, result, time.time() - start_time)
            if not outcome["success"]:
                failed = ", ".join(item["variant"] for item in outcome["failed_variants"])
                response = self.create_error_response(f"Failed variants: {failed}", "ABLATION_FAILED", EXIT_FAILURE)
                response["data"] = result
                return response
            return self.create_success_response(result)

        except Exception as e:
            return self.handle_exception(e)
