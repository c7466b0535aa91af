"""
Single entry point for the simulator: `python -m experiments.cli <command> [flags]`.

Commands are the app's management commands. Exit codes: 0 success, 1 failure
while running, 2 usage error. Failures print one line on stderr.
"""
import os
import sys

COMMANDS = ('gen', 'run', 'eval', 'sweep')
USAGE = f"usage: fmtc {{{','.join(COMMANDS)}}} [options]"


def _one_line(message):
    return ' '.join(str(message).split())


def cli_main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ('-h', '--help'):
        sys.stderr.write(USAGE + '\n')
        return 0 if argv else 2
    command, args = argv[0], argv[1:]
    if command not in COMMANDS:
        sys.stderr.write(f"fmtc: error: unknown command {command!r}; {USAGE}\n")
        return 2

    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'main.settings')
    import django
    django.setup()

    from django.core.management import call_command
    from django.core.management.base import CommandError

    from main.exceptions import FmtcError

    try:
        call_command('migrate', interactive=False, verbosity=0)
        call_command(command, *args)
    except CommandError as e:
        message = _one_line(e)
        sys.stderr.write(f"fmtc {command}: {message}\n")
        # the argument parser reports usage problems as "Error: ..."
        return 2 if message.startswith('Error:') else 1
    except FmtcError as e:
        sys.stderr.write(f"fmtc {command}: {_one_line(e)}\n")
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(cli_main())
