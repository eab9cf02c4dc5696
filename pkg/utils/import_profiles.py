import os
import sys
import csv
from pathlib import Path

from dotenv import load_dotenv

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from lib.csit_model import CsitProfile, validate_profile  # noqa: E402
from lib.errors import DofCsitError  # noqa: E402
from lib.profile_store import dump_profile, load_profile  # noqa: E402

# --- Main Logic ---
load_dotenv()


def _split_list(cell):
    if cell is None:
        raise ValueError("missing cell")
    return [float(x) for x in cell.strip('"').replace(" ", "").split(";") if x]


def get_existing_profiles(out_dir):
    """Profiles already in `out_dir`, keyed by name, so reruns never duplicate."""
    existing = {}
    for path in sorted(Path(out_dir).glob("*.profile")):
        try:
            existing[path.stem] = load_profile(path)
        except DofCsitError as e:
            print(f"Warning: could not read {path.name}, it will not be used for duplicate checks. Error: {e}")
    print(f"Found {len(existing)} existing profiles in {out_dir}.")
    return existing


def import_csv_to_profiles(csv_filepath, out_dir):
    """
    Reads rows of `name,L,a,b` (a and b as `;`-separated qualities) and writes one
    validated `<name>.profile` per row. Returns the per-outcome counts.
    """
    counts = {"imported": 0, "duplicates": 0, "invalid": 0}
    if not os.path.exists(csv_filepath):
        print(f"Error: File '{csv_filepath}' not found.")
        return counts

    existing = get_existing_profiles(out_dir)
    known = {(p.L, p.a, p.b) for p in existing.values()}

    print(f"Reading {csv_filepath} into '{out_dir}'...")

    try:
        with open(csv_filepath, mode="r", encoding="utf-8") as csvfile:
            reader = csv.DictReader(csvfile)
            for line, row in enumerate(reader, start=2):
                name = row["name"].strip('"').strip()

                try:
                    profile: CsitProfile = validate_profile(
                        int(row["L"]), _split_list(row["a"]), _split_list(row["b"])
                    )
                except (ValueError, TypeError) as e:
                    print(f"⚠️  Skipping line {line} (Invalid: {e}): {name}")
                    counts["invalid"] += 1
                    continue

                if not name or name in existing or (profile.L, profile.a, profile.b) in known:
                    print(f"⚠️  Skipping line {line} (Duplicate): {name}")
                    counts["duplicates"] += 1
                    continue

                dump_profile(profile, Path(out_dir) / f"{name}.profile")
                existing[name] = profile
                known.add((profile.L, profile.a, profile.b))
                counts["imported"] += 1

        print("-" * 40)
        print("✅ Import Complete!")
        print(f"   - Imported: {counts['imported']}")
        print(f"   - Skipped (Duplicates): {counts['duplicates']}")
        print(f"   - Skipped (Invalid): {counts['invalid']}")

    except KeyError as e:
        print(f"❌ CSV Error: Missing column {e}. Expecting: name, L, a, b")
    except OSError as e:
        print(f"❌ Error: {str(e)}")

    return counts


if __name__ == "__main__":
    source = sys.argv[1] if len(sys.argv) > 1 else "profiles.csv"
    target = sys.argv[2] if len(sys.argv) > 2 else os.environ.get("DOFCSIT_PROFILE_DIR", "profiles")
    import_csv_to_profiles(source, target)
