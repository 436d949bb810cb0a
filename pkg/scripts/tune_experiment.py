"""Desk-scale experiment prototype used to calibrate cover texture.

Not part of the package; run ad hoc while tuning synth_cover parameters.
"""

import sys
import time

import numpy as np

from stegbench import dataset, stego, trainer
from stegbench.network import build_network, desk_network_spec


def run(key_mode: str, payload: float, pairs: int = 1000, size: int = 32,
        epochs: int = 200, patience: int | None = 20, seed: int = 7) -> None:
    t0 = time.time()
    covers = dataset.synth_covers(seed, pairs, size)
    cfg = stego.StegoConfig("lsb_matching", payload, key_mode=key_mode,
                            key_seed=11, message_seed=13)
    stegos = [stego.embed(c, cfg, i).stego for i, c in enumerate(covers)]
    train_c, test_c = dataset.assemble(covers, stegos, 0.8, seed=21)
    print(f"gen+assemble {time.time()-t0:.1f}s  train={len(train_c)} test={len(test_c)}")

    spec = desk_network_spec(size, 16)
    params = build_network(spec, seed=31)
    tcfg = trainer.TrainConfig(batch_size=100, lr0=0.5, lr_decay=5e-7,
                               momentum=0.0, max_epochs=epochs,
                               patience=patience, shuffle_seed=41)
    t1 = time.time()
    result = trainer.train(params, spec, train_c, test_c, tcfg)
    hist = result.history
    best = max(r.test_acc for r in hist.records)
    print(f"train {time.time()-t1:.1f}s  epochs={len(hist)}  best_test={best:.4f} "
          f"@epoch {hist.best_epoch}  final_test={hist.records[-1].test_acc:.4f}")
    for r in hist.records[:: max(1, len(hist.records) // 12)]:
        print(f"  ep{r.epoch:3d} train={r.train_acc:.3f} test={r.test_acc:.3f} loss={r.mean_loss:.4f}")


if __name__ == "__main__":
    mode = sys.argv[1] if len(sys.argv) > 1 else "fixed"
    payload = float(sys.argv[2]) if len(sys.argv) > 2 else 0.4
    epochs = int(sys.argv[3]) if len(sys.argv) > 3 else 200
    run(mode, payload, epochs=epochs)
