from .ablation_command import AblationCommand
from .base_command import BaseCommand
from .eval3d_command import Eval3dCommand
from .fit_command import FitCommand
from .genviews_command import GenViewsCommand
from .gradcheck_command import GradcheckCommand
from .probmap_command import ProbmapCommand
from .render_command import RenderCommand

COMMANDS = {
    command.name: command
    for command in (
        RenderCommand(),
        GenViewsCommand(),
        FitCommand(),
        GradcheckCommand(),
        Eval3dCommand(),
        ProbmapCommand(),
        AblationCommand(),
    )
}

__all__ = ["BaseCommand", "COMMANDS"]
