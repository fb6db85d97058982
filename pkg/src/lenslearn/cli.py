"""Command-line front end.

    lenslearn train  --config run.json --out runs/a
    lenslearn dream  --config dream.json --out runs/d
    lenslearn gan    --config gan.json --out runs/g
    lenslearn bench  [--config bench.json] [--out DIR]
    lenslearn check

Configs are JSON objects; unknown keys are rejected.  See README.md for the
schema.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import checks, demos
from .arch import LayerSpec, build_network
from .errors import ConfigError, LensLearnError
from .lens import Mode, Port
from .learner import Learner, Phase, TrainState, dream_step, init_state, train
from .loss import loss_by_name, mse, rate_from_config
from .optim import from_config as optimiser_from_config
from .para import ParaMorph, batching, parse_para
from .rig import REAL, Z2, rig_by_name
from .tensor import Tensor

OPTIMISER_KEYS = {
    "gd": set(), "descent": set(), "ascent": set(),
    "momentum": {"gamma"}, "nesterov": {"gamma"},
    "adagrad": {"eps", "delta"}, "adam": {"beta1", "beta2", "eps", "delta"},
}
RATE_KEYS = {"constant": {"value"}, "proportional": {"value"}, "identity": set()}
DREAM_KEYS = {"params", "input", "target_index", "steps"}
GAN_KEYS = {"steps", "alpha", "real_mean", "real_std"}


def _check_section(cfg, allowed: dict, path: str, required=("kind",)):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected an object")
    kind = cfg.get("kind")
    if kind not in allowed:
        raise ConfigError(f"{path}.kind: unknown kind {kind!r}; choose from {sorted(allowed)}")
    for key in cfg:
        if key != "kind" and key not in allowed[kind]:
            raise ConfigError(f"{path}.{key}: not a field of {kind!r}")


@dataclass
class RunConfig:
    rig: str = "real"
    architecture: list | None = None
    expression: str | None = None
    loss: str = "mse"
    reduction: str = "sum"
    rate: dict = field(default_factory=lambda: {"kind": "constant", "value": 0.01})
    optimiser: dict = field(default_factory=lambda: {"kind": "gd"})
    epochs: int = 1
    batch_size: int = 1
    shuffle: bool = False
    seed: int = 0
    compose_mode: str = "memoised"
    dataset: str | None = None
    output: str | None = None
    init_params: str | None = None
    dream: dict | None = None
    gan: dict | None = None
    depths: list | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        for key in d:
            if key not in names:
                raise ConfigError(f"{key}: unknown config key")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        if self.rig not in ("real", "z2"):
            raise ConfigError(f"rig: expected 'real' or 'z2', got {self.rig!r}")
        if self.architecture is not None and self.expression is not None:
            raise ConfigError("architecture: give either architecture or expression, not both")
        if self.architecture is not None:
            if self.rig != "real":
                raise ConfigError("architecture: layer lists are real-valued; use expression for z2")
            for i, layer in enumerate(self.architecture):
                try:
                    LayerSpec.from_dict(layer)
                except (LensLearnError, KeyError, TypeError) as exc:
                    raise ConfigError(f"architecture[{i}]: {exc}") from None
        if self.loss not in ("mse", "sce", "dot", "xor"):
            raise ConfigError(f"loss: unknown loss {self.loss!r}")
        if self.reduction not in ("sum", "mean"):
            raise ConfigError(f"reduction: expected 'sum' or 'mean', got {self.reduction!r}")
        if self.reduction == "mean" and self.loss != "mse":
            raise ConfigError("reduction: mean reduction is only offered for mse")
        _check_section(self.rate, RATE_KEYS, "rate")
        _check_section(self.optimiser, OPTIMISER_KEYS, "optimiser")
        for name in ("epochs", "batch_size", "seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < (0 if name != "batch_size" else 1):
                raise ConfigError(f"{name}: expected a {'positive' if name == 'batch_size' else 'nonnegative'} integer")
        if self.compose_mode not in ("memoised", "checkpointed"):
            raise ConfigError(f"compose_mode: expected memoised or checkpointed, got {self.compose_mode!r}")
        for key, section, allowed in (("dream", self.dream, DREAM_KEYS), ("gan", self.gan, GAN_KEYS)):
            if section is not None:
                extra = set(section) - allowed
                if extra:
                    raise ConfigError(f"{key}.{sorted(extra)[0]}: unknown key")
        if self.depths is not None and (not self.depths or any(not isinstance(n, int) or n < 2
                                                                  for n in self.depths)):
            raise ConfigError("depths: expected a list of integers >= 2")

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def rig_obj(self):
        return rig_by_name(self.rig)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = RunConfig.from_dict(data)
    cfg.base_dir = Path(path).parent
    return cfg


def _resolve(cfg: RunConfig, name) -> Path:
    """Relative paths in a config file are taken relative to that file."""
    path = Path(name)
    base = getattr(cfg, "base_dir", None)
    return path if path.is_absolute() or base is None else base / path


# --- data ---------------------------------------------------------------------------------

def read_dataset(path, rig) -> tuple:
    """CSV with a header; ``x_*`` columns are features and ``y_*`` columns labels."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"dataset {path}: no rows")
    header = list(rows[0].keys())
    xs = [h for h in header if h.startswith("x_")]
    ys = [h for h in header if h.startswith("y_")]
    if not xs or not ys:
        raise ConfigError(f"dataset {path}: need x_ and y_ columns, got {header}")
    cast = int if rig is Z2 else float
    x = np.array([[cast(r[h]) for h in xs] for r in rows])
    y = np.array([[cast(r[h]) for h in ys] for r in rows])
    return x, y


def _split_wires(row: np.ndarray, port: Port) -> tuple:
    out, pos = [], 0
    for s in port.shapes:
        n = int(np.prod(s, dtype=int))
        out.append(Tensor(port.rig, row[pos:pos + n].reshape(s)))
        pos += n
    if pos != row.size:
        raise ConfigError(f"row has {row.size} values but the port {port!r} takes {pos}")
    return tuple(out)


def make_examples(x, y, model: ParaMorph, batch_size: int, stacked: bool) -> list:
    """Turn dataset rows into (input, label) wire tuples for ``model``."""
    port_in, port_out = model.input, model.output
    if stacked:
        # a batch-matrix model takes ``batch_size`` rows at once
        n = (len(x) // batch_size) * batch_size
        return [((Tensor(port_in.rig, x[i:i + batch_size]),), (Tensor(port_out.rig, y[i:i + batch_size]),))
                for i in range(0, n, batch_size)]
    n = (len(x) // batch_size) * batch_size
    out = []
    for i in range(0, n, batch_size):
        xin = np.concatenate(x[i:i + batch_size])
        yin = np.concatenate(y[i:i + batch_size])
        out.append((_split_wires(xin, port_in), _split_wires(yin, port_out)))
    return out


def params_to_json(params: tuple, rig) -> dict:
    return {"rig": str(rig).lower(), "params": [{"shape": list(t.shape), "values": t.tolist()} for t in params]}


def params_from_json(data: dict) -> tuple:
    rig = rig_by_name(data["rig"])
    return tuple(Tensor(rig, np.array(p["values"]).reshape(p["shape"])) for p in data["params"])


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_jsonl(path: Path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# --- model assembly --------------------------------------------------------------------------

def build_model(cfg: RunConfig):
    """Returns (model, stacked) where ``stacked`` means a batch-matrix model."""
    if cfg.expression is not None:
        return parse_para(cfg.expression, cfg.rig_obj), False
    if cfg.architecture is None:
        raise ConfigError("architecture: a layer list or an expression is required")
    specs = [LayerSpec.from_dict(d) for d in cfg.architecture]
    batches = {s.attrs.get("batch") for s in specs} - {None}
    if batches and batches != {cfg.batch_size}:
        raise ConfigError(f"architecture: layer batch sizes {sorted(batches)} must equal batch_size")
    return build_network(specs), bool(batches)


def build_learner(cfg: RunConfig, mode: Mode, phase=Phase.PARAMS, model=None, stacked=False):
    if model is None:
        model, stacked = build_model(cfg)
    if cfg.batch_size > 1 and not stacked and phase is Phase.PARAMS:
        model = batching(model, cfg.batch_size)
    if cfg.loss == "mse":
        loss = mse(model.output, mean=cfg.reduction == "mean")
    else:
        loss = loss_by_name(cfg.loss, model.output)
    target = model.param if phase is Phase.PARAMS else model.input
    opt = optimiser_from_config(cfg.optimiser, target)
    return Learner(model, loss, rate_from_config(cfg.rate), opt, phase, mode), stacked


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands --------------------------------------------------------------------------------

def cmd_train(cfg: RunConfig, out: Path, mode: Mode) -> int:
    if cfg.dataset is None:
        raise ConfigError("dataset: a CSV path is required for train")
    learner, stacked = build_learner(cfg, mode)
    x, y = read_dataset(_resolve(cfg, cfg.dataset), cfg.rig_obj)
    data = make_examples(x, y, learner.model, cfg.batch_size, stacked)
    if not data:
        raise ConfigError(f"dataset: fewer rows than batch_size {cfg.batch_size}")
    rng = np.random.default_rng(cfg.seed)
    if cfg.init_params:
        params = params_from_json(json.loads(_resolve(cfg, cfg.init_params).read_text()))
        st = init_state(learner, params=params)
    else:
        st = init_state(learner, rng)
    st, metrics = train(learner, data, cfg.epochs, seed=cfg.seed, shuffle=cfg.shuffle, state=st)
    _write_jsonl(out / "metrics.jsonl", metrics)
    _write_json(out / "params.json", params_to_json(st.params, cfg.rig_obj))
    summary = {"steps": st.step, "epochs": cfg.epochs,
               "final_mean_loss": metrics[-1]["mean_loss"] if metrics else None,
               "compose_mode": mode.value, "config": cfg.to_dict()}
    _write_json(out / "summary.json", summary)
    print(f"trained {st.step} steps; final mean loss {summary['final_mean_loss']}")
    return 0


def cmd_dream(cfg: RunConfig, out: Path, mode: Mode) -> int:
    section = cfg.dream or {}
    for key in ("params", "input", "target_index"):
        if key not in section:
            raise ConfigError(f"dream.{key}: required")
    model, stacked = build_model(cfg)
    if stacked:
        raise ConfigError("dream: batch-matrix models are not supported")
    dream_cfg = RunConfig(**{**cfg.to_dict(), "loss": "dot", "reduction": "sum",
                             "optimiser": cfg.optimiser if cfg.optimiser["kind"] != "gd"
                             else {"kind": "ascent"}})
    learner, _ = build_learner(dream_cfg, mode, Phase.DREAM, model)
    params = params_from_json(json.loads(_resolve(cfg, section["params"]).read_text()))
    x = _split_wires(np.asarray(section["input"], dtype=float), model.input)
    out_port = model.output
    if len(out_port) != 1 or len(out_port.shapes[0]) != 1:
        raise ConfigError("dream: the model must have a single vector output")
    k = section["target_index"]
    if not 0 <= k < out_port.shapes[0][0]:
        raise ConfigError(f"dream.target_index: {k} out of range")
    mask = np.zeros(out_port.shapes[0][0])
    mask[k] = 1.0
    y_i = (Tensor(REAL, mask),)
    st = TrainState(x, learner.optimiser.init_state())
    records = [{"step": 0, "activation": float(model.fwd(st.params, params)[0].data[k])}]
    for step in range(1, int(section.get("steps", 10)) + 1):
        st = dream_step(learner, st, params, y_i)
        records.append({"step": step, "activation": float(model.fwd(st.params, params)[0].data[k])})
    _write_jsonl(out / "dream.jsonl", records)
    _write_json(out / "dreamed_input.json",
                {"input": np.concatenate([t.data.reshape(-1) for t in st.params]).tolist()})
    print(f"dreamed {len(records) - 1} steps; activation {records[0]['activation']:.6g} -> "
          f"{records[-1]['activation']:.6g}")
    return 0


def cmd_gan(cfg: RunConfig, out: Path, mode: Mode) -> int:
    section = dict(cfg.gan or {})
    gaps, st = demos.gan_toy(seed=cfg.seed, steps=int(section.get("steps", 200)),
                             alpha=float(section.get("alpha", 0.005)),
                             real_mean=float(section.get("real_mean", 1.0)),
                             real_std=float(section.get("real_std", 0.5)), mode=mode)
    _write_jsonl(out / "gan.jsonl", [{"step": i, "gap": g} for i, g in enumerate(gaps)])
    _write_json(out / "summary.json", {"initial_gap": gaps[0], "final_gap": gaps[-1],
                                       "params": params_to_json(st.params, REAL)})
    print(f"score gap {gaps[0]:.6g} -> {gaps[-1]:.6g}")
    return 0


def bench_table(depths) -> list:
    rows = []
    for n in depths:
        mem, y1, d1 = checks.chain_counts(n, Mode.MEMOISED)
        ck, y2, d2 = checks.chain_counts(n, Mode.CHECKPOINTED)
        rows.append({"depth": n, "memoised": mem, "checkpointed": ck,
                     "max_output_diff": checks.max_diff(y1 + d1, y2 + d2)})
    return rows


def cmd_bench(cfg: RunConfig, out: Path | None, mode: Mode) -> int:
    rows = bench_table(cfg.depths or list(range(2, 9)))
    print(f"{'depth':>5}  {'memoised fwd calls':<28}  {'checkpointed fwd calls':<28}  max |diff|")
    for r in rows:
        print(f"{r['depth']:>5}  {' '.join(map(str, r['memoised'])):<28}  "
              f"{' '.join(map(str, r['checkpointed'])):<28}  {r['max_output_diff']:.1e}")
    if out is not None:
        _write_json(out / "bench.json", rows)
    return 0


def cmd_check() -> int:
    results = checks.run_all()
    ok = all(r.passed for r in results)
    total = sum(r.seconds for r in results)
    print(f"{'all suites passed' if ok else 'FAILURES'} in {total:.2f}s")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lenslearn", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=["train", "dream", "gan", "bench", "check"])
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--mode", choices=[m.value for m in Mode], help="override compose_mode")
    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check()
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.mode is not None:
            cfg.compose_mode = args.mode
        mode = Mode(cfg.compose_mode)
        if args.command == "bench":
            out = _out_dir(args, cfg) if (args.out or cfg.output) else None
            return cmd_bench(cfg, out, mode)
        if args.config is None:
            parser.error(f"{args.command} needs --config")
        out = _out_dir(args, cfg)
        return {"train": cmd_train, "dream": cmd_dream, "gan": cmd_gan}[args.command](cfg, out, mode)
    except (LensLearnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
