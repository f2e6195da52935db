from django.core.management.base import BaseCommand

from sensing.services.experiments import run_train

from ._common import add_run_arguments, guarded, run_flags, summary


class Command(BaseCommand):
    help = 'Train a probe and measurement circuit from an experiment config'

    def add_arguments(self, parser):
        add_run_arguments(parser)

    def handle(self, *args, **options):
        record = guarded(lambda: run_train(**run_flags(options)))
        payload = record['payload']
        self.stdout.write(summary(record))
        self.stdout.write(
            self.style.SUCCESS(
                f"Training finished!\n"
                f"P_E: {payload['error_probability']:.3e}\n"
                f"Energy residual: {payload['energy_residual']:.2e}\n"
                f"Cutoff: {payload['cutoff']}"
            )
        )
