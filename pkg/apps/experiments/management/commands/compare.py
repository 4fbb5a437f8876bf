"""
Compare two methods per configuration: efficiency delta, message and replication ratios.

Usage:
    python manage.py compare task-sweep.csv
    python manage.py compare task-sweep.csv --baseline active --candidate df
    python manage.py compare --from-db --label desk
"""

from django.core.management.base import BaseCommand, CommandError

from apps.experiments.services import compare, format_comparisons, load_runs, read_csv
from core.exceptions import GridwalkError


class Command(BaseCommand):
    help = "Compare a candidate method against a baseline on every shared configuration"

    def add_arguments(self, parser):
        parser.add_argument("csv", nargs="?", help="CSV written by run or sweep")
        parser.add_argument("--from-db", action="store_true", help="Read stored runs instead of a CSV")
        parser.add_argument("--label", help="With --from-db, only runs saved under this label")
        parser.add_argument("--baseline", default="active")
        parser.add_argument("--candidate", default="dm")

    def handle(self, *args, **options):
        if bool(options["csv"]) == options["from_db"]:
            raise CommandError("Give either a CSV path or --from-db.")
        try:
            if options["from_db"]:
                runs = load_runs(options["label"])
                source = "database"
            else:
                with open(options["csv"], encoding="utf-8", newline="") as fh:
                    runs = read_csv(fh)
                source = options["csv"]
            comparisons = compare(runs, baseline=options["baseline"], candidate=options["candidate"])
        except GridwalkError as exc:
            raise CommandError(f"{options['csv'] or 'database'}: {exc}") from exc
        except OSError as exc:
            raise CommandError(f"{exc.filename}: {exc.strerror}") from exc

        self.stdout.write(f"{options['candidate']} vs {options['baseline']} ({source})")
        self.stdout.write(format_comparisons(comparisons), ending="")
