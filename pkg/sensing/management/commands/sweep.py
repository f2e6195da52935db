from django.core.management.base import BaseCommand

from sensing.services.experiments import run_sweep

from ._common import add_run_arguments, guarded, run_flags, summary


class Command(BaseCommand):
    help = 'Run a parameter sweep and write one CSV per figure panel'

    def add_arguments(self, parser):
        add_run_arguments(parser)

    def handle(self, *args, **options):
        record = guarded(lambda: run_sweep(**run_flags(options)))
        self.stdout.write(summary(record))
        for method, details in record['payload']['methods'].get('default', {}).items():
            if isinstance(details, dict) and details.get('epsilon_th') is not None:
                self.stdout.write(f"{method}: epsilon_th = {details['epsilon_th']}")
        self.stdout.write(self.style.SUCCESS(f"Sweep finished: {record['payload']['panel']}.csv"))
