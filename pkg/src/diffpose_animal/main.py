from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .errors import EXIT_OK, exit_code_for
from .log import log
from .numerics.serial import VERSION as DPAT_VERSION
from .pipeline.checkpoint import CHECKPOINT_VERSION
from .priors import EMBEDDING_HEADER_VERSION, PROMPT_TEMPLATE_VERSION
from .synthdata.split import ANNOTATION_VERSION
from .tasks import embed, evaluate, gen_data, infer, plot, train

FORMATS_EPILOG = (
    "wersje formatów:\n"
    f"  DPAT (rekordy tensorów)       v{DPAT_VERSION}\n"
    f"  nagłówek embeddingów          v{EMBEDDING_HEADER_VERSION}\n"
    f"  checkpoint                    v{CHECKPOINT_VERSION}\n"
    f"  adnotacje (COCO keypoints)    v{ANNOTATION_VERSION}\n"
    f"  szablony promptów             v{PROMPT_TEMPLATE_VERSION}\n"
    "kody wyjścia: 0 ok | 1 I/O | 2 użycie/konfiguracja | 3 awaria numeryczna"
)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="diffpose-animal",
        description="Estymacja pozy zwierząt jako warunkowe odszumianie heatmap.",
        epilog=FORMATS_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = ap.add_subparsers(dest="command", required=True, metavar="<komenda>")

    p = sub.add_parser("gen-data", help="syntetyczny split (obrazy P3 + adnotacje COCO)", epilog=FORMATS_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--spec", default="quadruped", help="wbudowany szkielet albo plik JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="plik key=value dla SynthConfig")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=gen_data.run)

    p = sub.add_parser("embed", help="prompty + embeddingi (pseudo-embedder albo --import)")
    p.add_argument("--species")
    p.add_argument("--keypoints-from", dest="keypoints_from", help="plik adnotacji (nazwy keypointów)")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--import", dest="import_path", help="zewnętrzny plik embeddingów do walidacji")
    p.add_argument("--out", required=True)
    p.set_defaults(func=embed.run)

    p = sub.add_parser("train", help="trening denoisera")
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KLUCZ=WARTOŚĆ", help="nadpisanie pola TrainConfig")
    p.add_argument("--resume", help="checkpoint do wznowienia")
    p.add_argument("--out", required=True)
    p.set_defaults(func=train.run)

    p = sub.add_parser("infer", help="predykcje dla splitu")
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["literal", "ddim"])
    p.add_argument("--workers", type=int)
    p.add_argument("--dump-dir", dest="dump_dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=infer.run)

    p = sub.add_parser("eval", help="AP/AR (OKS), PCK, AUC")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--config", help="plik key=value dla EvalConfig")
    p.add_argument("--out", required=True)
    p.set_defaults(func=evaluate.run)

    p = sub.add_parser("plot", help="krzywe z CSV → SVG")
    p.add_argument("--csv", action="append", required=True)
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--title")
    p.add_argument("--out", required=True)
    p.set_defaults(func=plot.run)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    log.info("■ diffpose-animal %s: START", args.command)
    try:
        code = args.func(args)
    except Exception as e:
        code = exit_code_for(e)
        log.error("%s: %s: %s", args.command, type(e).__name__, e)
        print(f"diffpose-animal {args.command}: {e}", file=sys.stderr)
        return code
    if code == EXIT_OK:
        log.info("■ diffpose-animal %s: OK", args.command)
    return code


if __name__ == "__main__":
    sys.exit(main())
