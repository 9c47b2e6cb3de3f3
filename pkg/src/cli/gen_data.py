"""
gen-data command for xmd CLI
"""
from pathlib import Path

from ..console import console
from ..data import SPLITS, generate
from ..storage import get_run_dir, save_dataset, write_json
from .common import command_parser, reports_errors, resolve


@reports_errors
def handle_gen_data_command(args):
    """Write the benchmark splits as dataset files under <out>/data"""
    parser = command_parser("gen-data", "generate the synthetic paired benchmark")
    parser.add_argument("--split", action="append", choices=SPLITS, help="only this split (repeatable)")
    options = parser.parse_args(args)
    config = resolve(options)

    data_dir = get_run_dir(config.out_dir, "data")
    write_json(Path(config.out_dir) / "config.json", config.to_dict())
    for split in options.split or config.data.splits:
        dataset = generate(config.data, split)
        path = save_dataset(dataset, data_dir / f"{split}.bin")
        console.print(f"✅ {split:<17} {len(dataset):>6} pairs  📁 {path}")
    console.print(f"💡 Use --set data_path={data_dir} to train on these files")
