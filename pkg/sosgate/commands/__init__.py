"""
The commands package holds one module per sosgate subcommand.

Every command module has the attributes:

    name            the subcommand as typed on the command line
    help            a one-line description for --help
    add_arguments   a function adding the command's flags to a parser
    overrides       a function from parsed flags to config overrides
    run             a function (args, cfg) -> exit code
"""

# Exit codes shared by all commands.
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMERGENCY = 2
EXIT_DIVERGED = 3
EXIT_GRADCHECK_FAILED = 4

from . import make_fixtures, train, evaluate, detect, gradcheck  # noqa: E402

commands_list = [make_fixtures, train, evaluate, detect, gradcheck]
