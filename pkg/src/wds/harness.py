"""Config-driven experiment runner: BER sweeps, classifier studies, mapping BER, complexity tables.

Every random draw comes from a generator derived from ``(seed, point, trial)``
so a rerun with the same config reproduces every CSV byte for byte. Wall
time only goes to the ``*.meta.json`` side files.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import json
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelProfile, awgn, impair
from .classify import (ConfusionMatrix, EcocModel, WaveletBank, evaluate, extract_features,
                       train_on_features)
from .complexity import complexity_rows
from .detect import detect
from .patterns import (ES_N0_GRID_DB, LabeledDataset, Schedule, generate_da, generate_dd,
                       get_pattern, schedule)
from .sefdm import QPSK, SefdmConfig, correlation_matrix, demodulate, modulate, random_symbols
from . import wlan

KINDS = ("ber", "classify", "mapping-ber", "complexity", "gen-dataset")
RECEIVERS = ("legit", "ofdm", "eve1", "eve2", "modem")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "ber"
    seed: int = 0
    es_n0_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    pattern: str = "wlan-type-iii"
    n_subcarriers: int = 52
    oversampling: Fraction = Fraction(16, 13)
    bcf: float = 1.0
    # Monte-Carlo control
    trials: int = 10
    max_trials: int = 100
    min_errors: int = 100
    symbols_per_frame: int = 50
    workers: int = 1
    # receive chain
    receiver: str = "legit"
    detector: str = "id"
    max_iter: int = 20
    sd_node_budget: int = 1_000_000
    feedback: str = "tanh"
    fading: bool = False
    ideal_channel: bool = False
    track_phase: bool = True
    # classifier
    mode: str = "DD"
    train_per_class: int = 500
    test_per_class: int = 200
    train_es_n0_db: tuple[float, ...] = tuple(float(x) for x in ES_N0_GRID_DB)
    n_scales: int = 32
    svm_lambda: float = 1e-3
    svm_epochs: int = 50
    model: str = ""
    oracle: bool = False
    # mapping BER: "identity", "uniform" or a confusion JSON path
    confusion: str = "uniform"
    # complexity
    fft_size: int = 64
    use_dft_size: bool = False
    out: str = "results"
    channel: ChannelProfile = field(default_factory=ChannelProfile)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if not self.es_n0_db:
            raise ConfigError("es_n0_db grid is empty")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.max_trials < self.trials:
            object.__setattr__(self, "max_trials", self.trials)
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.receiver not in RECEIVERS:
            raise ConfigError(f"unknown receiver {self.receiver!r}; choose from {RECEIVERS}")
        if self.mode.upper() not in ("DD", "DA"):
            raise ConfigError(f"mode must be DD or DA, got {self.mode!r}")
        if self.workers < 1 or self.symbols_per_frame < 1:
            raise ConfigError("workers and symbols_per_frame must be positive")
        try:
            get_pattern(self.pattern)
            self.sefdm()
        except (KeyError, ValueError) as e:
            raise ConfigError(str(e)) from e

    def sefdm(self, alpha: float | None = None) -> SefdmConfig:
        return SefdmConfig(self.n_subcarriers, self.oversampling, self.bcf if alpha is None else alpha)

    @property
    def profile(self) -> ChannelProfile | None:
        return self.channel if self.fading else None

    def to_flat(self) -> dict[str, str]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "channel":
                out.update(v.to_flat())
            else:
                out[f.name] = _format(v)
        return out

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _format(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_format(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# dotted spellings accepted for detector parameters
ALIASES = {"id.max_iter": "max_iter", "id.feedback": "feedback", "sd.node_budget": "sd_node_budget"}

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _convert(name: str, typ: str, raw: str):
    raw = raw.strip()
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            return _BOOL[raw.lower()]
        if typ == "Fraction":
            return Fraction(raw)
        if typ.startswith("tuple"):
            return tuple(float(x) for x in raw.replace(" ", "").split(",") if x)
        return raw
    except (ValueError, KeyError, ZeroDivisionError) as e:
        raise ConfigError(f"bad value for {name}: {raw!r}") from e


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse a flat ``key = value`` file (``#`` comments; ``channel.*`` keys set the fading profile)."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[wds]\n" + text)
    except configparser.Error as e:
        raise ConfigError(f"unreadable config: {e}") from e
    kv = dict(cp["wds"])
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    kw, chan = {}, {}
    for k, v in kv.items():
        key = ALIASES.get(k, k).replace("-", "_")
        if key.startswith("channel."):
            chan[key] = v
        elif key in types and key != "channel":
            kw[key] = _convert(key, str(types[key]), v)
        else:
            raise ConfigError(f"unknown config key {k!r}")
    for k, v in overrides.items():
        if v is not None:
            kw[k] = v
    try:
        if chan:
            kw["channel"] = ChannelProfile.from_flat(chan)
        return ExperimentConfig(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    except ValueError as e:
        raise ConfigError(str(e)) from e


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from e
    return parse_config(text, **overrides)


def derive_seed(*parts: int) -> int:
    """A 32-bit seed hashed from integer parts (order matters)."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def binomial_stderr(p: float, n: int) -> float:
    return float(np.sqrt(p * (1 - p) / n)) if n > 0 else float("nan")


# --- result tables ------------------------------------------------------------


def _git_version() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class ResultTable:
    """Rows of ``(x, metric, stderr, n, ...)`` plus a config echo."""

    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self):
        missing = {"x", "metric", "stderr", "n"} - set(self.columns)
        if missing:
            raise ValueError(f"result table lacks columns {sorted(missing)}")

    def add(self, **values) -> None:
        if values.get("n", 0) > 1 and values.get("stderr") is None:
            raise ValueError("stderr is required when n > 1")
        self.rows.append(tuple(values.get(c) for c in self.columns))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def select(self, **match) -> list[dict]:
        out = []
        for r in self.rows:
            d = dict(zip(self.columns, r))
            if all(d.get(k) == v for k, v in match.items()):
                out.append(d)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# wds {__version__} {self.name}\n")
        buf.write(f"# seed={self.config.get('seed', '')}\n")
        for k in sorted(self.config):
            buf.write(f"# {k}={self.config[k]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in r])
        return buf.getvalue()

    def meta(self) -> dict:
        return {"name": self.name, "version": _git_version(), "config": self.config,
                "seed": self.config.get("seed"), "wall_time_s": self.wall_time, "rows": len(self.rows)}

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.name}.csv"
        path.write_text(self.to_csv())
        (out / f"{self.name}.meta.json").write_text(json.dumps(self.meta(), indent=1, sort_keys=True))
        return path


def _json_dump(path: Path, doc: dict, cfg: ExperimentConfig) -> None:
    doc = dict(doc, config=cfg.to_flat(), seed=cfg.seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# --- BER sweeps --------------------------------------------------------------


def _frame_rngs(cfg: ExperimentConfig, point: int, trial: int):
    """Data/noise generator and schedule seed for one frame; shared by every receiver."""
    return np.random.default_rng([cfg.seed, point, trial]), derive_seed(cfg.seed, point, trial, 1)


def _modem_trial(cfg: ExperimentConfig, point: int, trial: int, es_n0: float):
    rng, _ = _frame_rngs(cfg, point, trial)
    sc = cfg.sefdm()
    s, idx = random_symbols(rng, (cfg.symbols_per_frame, sc.n_subcarriers), QPSK)
    x = modulate(sc, s)
    y = awgn(x, es_n0, rng)
    R = demodulate(sc, y)
    params = {"node_budget": cfg.sd_node_budget} if cfg.detector == "sd" else {}
    if cfg.detector == "id":
        sigma2 = float(np.mean(np.abs(x) ** 2) / 10 ** (es_n0 / 10))
        params = {"max_iter": cfg.max_iter, "feedback": cfg.feedback, "noise_var": sigma2}
    res = detect(cfg.detector, correlation_matrix(sc), R, QPSK, **params)
    tx = QPSK.indices_to_bits(idx)
    return int(np.count_nonzero(res.bits != tx)), tx.size, None, 0


def _wlan_trial(cfg: ExperimentConfig, point: int, trial: int, es_n0: float, model_json: str | None):
    rng, sched_seed = _frame_rngs(cfg, point, trial)
    wcfg = wlan.WlanConfig()
    p = get_pattern(cfg.pattern)
    n = cfg.symbols_per_frame
    sched = Schedule((0,) * n, p, sched_seed) if cfg.receiver == "ofdm" else schedule(p, n, sched_seed)
    bits = rng.integers(0, 2, n * wcfg.bits_per_symbol)
    stream = impair(wlan.build_frame(wcfg, sched, bits).samples, cfg.profile, es_n0, rng)
    cm = None
    try:
        if cfg.receiver in ("legit", "ofdm"):
            rx = wlan.legit_receive(stream, wcfg, sched, cfg.ideal_channel, cfg.max_iter,
                                    cfg.track_phase, cfg.feedback)
        elif cfg.receiver == "eve1":
            rx = wlan.eve_scenario1_receive(stream, wcfg, n, cfg.ideal_channel, cfg.track_phase)
        else:
            model = EcocModel.from_json(model_json) if model_json else None
            rx, cm = wlan.eve_scenario2_receive(
                stream, wcfg, model, true_labels=np.array(sched.labels), oracle=cfg.oracle,
                alphas=p.alphas, n_symbols=n, ideal_channel=cfg.ideal_channel,
                max_iter=cfg.max_iter, track_phase=cfg.track_phase, feedback=cfg.feedback)
            cm = cm.counts
    except wlan.NoFrameError:
        # a missed frame still costs its bits: the receiver delivers all zeros
        return int(np.count_nonzero(bits)), bits.size, None, 1
    return int(np.count_nonzero(rx != bits)), bits.size, cm, 0


def _trial(args):
    cfg, point, trial, es_n0, model_json = args
    if cfg.receiver == "modem":
        return _modem_trial(cfg, point, trial, es_n0)
    return _wlan_trial(cfg, point, trial, es_n0, model_json)


def _map_trials(cfg: ExperimentConfig, jobs, pool):
    if pool is None:
        return [_trial(j) for j in jobs]
    return list(pool.map(_trial, jobs))


def _eve2_model(cfg: ExperimentConfig) -> EcocModel | None:
    if cfg.oracle:
        return None
    if cfg.model:
        return EcocModel.from_json(Path(cfg.model).read_text())
    train_cfg = cfg.replace(kind="classify", n_subcarriers=52, oversampling=Fraction(16, 13))
    model, _ = _train_model(train_cfg)
    return model


def run_ber_sweep(cfg: ExperimentConfig) -> tuple[ResultTable, dict]:
    """BER per Es/N0 point with binomial standard error.

    At least ``trials`` frames run per point; more follow, up to
    ``max_trials``, until ``min_errors`` bit errors are seen. A frame the
    receiver fails to find counts as delivered all-zero (column ``lost``).
    Returns the table and, for the Scenario-II receiver, confusion counts per point.
    """
    t0 = time.perf_counter()
    table = ResultTable("ber", ("x", "metric", "stderr", "n", "errors", "trials", "lost"),
                        config=cfg.to_flat())
    model = _eve2_model(cfg) if cfg.receiver == "eve2" else None
    model_json = model.to_json() if model is not None else None
    confusions = {}
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for i, es_n0 in enumerate(cfg.es_n0_db):
            errors = bits = done = lost = 0
            cm = None
            while done < cfg.trials or (errors < cfg.min_errors and done < cfg.max_trials):
                batch = cfg.trials if done == 0 else min(cfg.workers, cfg.max_trials - done)
                jobs = [(cfg, i, done + k, es_n0, model_json) for k in range(batch)]
                for e, b, c, miss in _map_trials(cfg, jobs, pool):
                    errors += e
                    bits += b
                    lost += miss
                    if c is not None:
                        cm = c if cm is None else cm + c
                done += batch
            p = errors / bits
            table.add(x=float(es_n0), metric=p, stderr=binomial_stderr(p, bits), n=bits,
                      errors=errors, trials=done, lost=lost)
            if cm is not None:
                labels = list(get_pattern(cfg.pattern).alphas)
                confusions[repr(float(es_n0))] = ConfusionMatrix(cm, labels).to_dict()
    finally:
        if pool is not None:
            pool.shutdown()
    table.wall_time = time.perf_counter() - t0
    return table, confusions


# --- classifier studies -------------------------------------------------------


def _generate(cfg: ExperimentConfig, per_class: int, noise, seed: int, mode: str) -> LabeledDataset:
    gen = generate_dd if mode.upper() == "DD" else generate_da
    return gen(get_pattern(cfg.pattern), per_class, cfg.sefdm(1.0), cfg.profile, noise, seed)


def _train_model(cfg: ExperimentConfig) -> tuple[EcocModel, WaveletBank]:
    train_ds = _generate(cfg, cfg.train_per_class, cfg.train_es_n0_db, cfg.seed, cfg.mode)
    bank = WaveletBank(train_ds.n_samples, cfg.n_scales)
    feats = extract_features(train_ds.samples, bank)
    model = train_on_features(feats, train_ds.labels, train_ds.n_classes, bank, cfg.seed,
                              cfg.svm_lambda, cfg.svm_epochs, train_ds.pattern.alphas)
    return model, bank


def dd_test_seed(cfg: ExperimentConfig, point: int) -> int:
    """Seed of the DD test set at one Es/N0 point; independent of the training mode."""
    return derive_seed(cfg.seed, 0x7E57, point)


def run_classifier_study(cfg: ExperimentConfig) -> tuple[ResultTable, dict, EcocModel]:
    """Train on a DD or DA set over the training noise grid, test on fresh DD sets per Es/N0."""
    t0 = time.perf_counter()
    model, bank = _train_model(cfg)
    table = ResultTable("classify", ("x", "metric", "stderr", "n"), config=cfg.to_flat())
    confusions = {}
    for i, es_n0 in enumerate(cfg.es_n0_db):
        test = _generate(cfg, cfg.test_per_class, float(es_n0), dd_test_seed(cfg, i), "DD")
        cm = evaluate(model, test, bank)
        table.add(x=float(es_n0), metric=cm.accuracy, stderr=binomial_stderr(cm.accuracy, cm.total),
                  n=cm.total)
        confusions[repr(float(es_n0))] = cm.to_dict()
    table.wall_time = time.perf_counter() - t0
    return table, confusions, model


# --- mismatch mapping ---------------------------------------------------------


def resolve_confusion(spec: str, k: int) -> np.ndarray:
    """Confusion weights from ``identity``, ``uniform`` or a confusion JSON file."""
    if spec == "identity":
        return np.eye(k)
    if spec == "uniform":
        return np.ones((k, k))
    try:
        doc = json.loads(Path(spec).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read confusion matrix {spec}: {e}") from e
    if "counts" not in doc:
        # a per-Es/N0 export: pool every point
        per = doc.get("per_es_n0_db", {})
        if not per:
            raise ConfigError(f"{spec} holds no confusion counts")
        doc = {"counts": np.sum([v["counts"] for v in per.values()], axis=0)}
    counts = np.asarray(ConfusionMatrix.from_dict(doc).counts, dtype=float)
    if counts.shape != (k, k):
        raise ConfigError(f"confusion matrix is {counts.shape}, pattern has {k} classes")
    if counts.sum() <= 0:
        raise ConfigError("confusion matrix has no mass")
    return counts


def _mapping_cell(cfg: ExperimentConfig, point: int, trial: int, es_n0: float, true_c: int, pred_c: int):
    rng, _ = _frame_rngs(cfg, point, trial)
    wcfg = wlan.WlanConfig()
    p = get_pattern(cfg.pattern)
    n = cfg.symbols_per_frame
    sched = Schedule((true_c,) * n, p)
    bits = rng.integers(0, 2, n * wcfg.bits_per_symbol)
    stream = impair(wlan.build_frame(wcfg, sched, bits).samples, cfg.profile, es_n0, rng)
    try:
        rx, _ = wlan.eve_scenario2_receive(stream, wcfg, None, true_labels=np.full(n, pred_c), oracle=True,
                                           alphas=p.alphas, n_symbols=n, ideal_channel=cfg.ideal_channel,
                                           max_iter=cfg.max_iter, track_phase=cfg.track_phase,
                                           feedback=cfg.feedback)
    except wlan.NoFrameError:
        rx = np.zeros_like(bits)
    return int(np.count_nonzero(rx != bits)), bits.size


def run_mapping_ber(cfg: ExperimentConfig, confusion: np.ndarray | None = None) -> ResultTable:
    """BER of every (true, predicted) BCF pairing, combined with confusion-matrix weights.

    Rows per Es/N0: one per cell (``cell-i-j``), the confusion-weighted
    average (``weighted``) and the plain average over all cells (``unweighted``).
    """
    t0 = time.perf_counter()
    k = get_pattern(cfg.pattern).n_classes
    w = resolve_confusion(cfg.confusion, k) if confusion is None else np.asarray(confusion, float)
    w = w / w.sum()
    table = ResultTable("mapping_ber", ("x", "series", "metric", "stderr", "n"), config=cfg.to_flat())
    for i, es_n0 in enumerate(cfg.es_n0_db):
        ber = np.zeros((k, k))
        nb = np.zeros((k, k), dtype=np.int64)
        for a in range(k):
            for b in range(k):
                e = 0
                for t in range(cfg.trials):
                    de, dn = _mapping_cell(cfg, i, t, float(es_n0), a, b)
                    e += de
                    nb[a, b] += dn
                ber[a, b] = e / nb[a, b]
                table.add(x=float(es_n0), series=f"cell-{a}-{b}", metric=ber[a, b],
                          stderr=binomial_stderr(ber[a, b], nb[a, b]), n=int(nb[a, b]))
        var = ber * (1 - ber) / nb
        table.add(x=float(es_n0), series="weighted", metric=float(np.sum(w * ber)),
                  stderr=float(np.sqrt(np.sum(w**2 * var))), n=int(nb.sum()))
        u = np.full((k, k), 1 / k**2)
        table.add(x=float(es_n0), series="unweighted", metric=float(np.mean(ber)),
                  stderr=float(np.sqrt(np.sum(u**2 * var))), n=int(nb.sum()))
    table.wall_time = time.perf_counter() - t0
    return table


# --- complexity and datasets --------------------------------------------------


def run_complexity(cfg: ExperimentConfig) -> ResultTable:
    table = ResultTable("complexity", ("x", "series", "metric", "stderr", "n"), config=cfg.to_flat())
    for a, scheme, count in complexity_rows(cfg.fft_size, get_pattern(cfg.pattern).alphas,
                                            cfg.use_dft_size):
        table.add(x=a, series=scheme, metric=count, stderr=None, n=1)
    return table


def run_gen_dataset(cfg: ExperimentConfig, out_dir) -> LabeledDataset:
    """Write ``dataset.bin`` and ``manifest.csv`` for the configured pattern and mode."""
    ds = _generate(cfg, cfg.train_per_class, cfg.train_es_n0_db, cfg.seed, cfg.mode)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds.save(out / "dataset.bin")
    head = "".join(f"# {k}={v}\n" for k, v in sorted(cfg.to_flat().items()))
    (out / "manifest.csv").write_text(f"# seed={cfg.seed}\n" + head + ds.manifest_csv())
    return ds


def run(cfg: ExperimentConfig, out_dir=None) -> list[Path]:
    """Run the configured experiment and write its outputs; returns the written paths."""
    out = Path(out_dir or cfg.out)
    written = []
    if cfg.kind == "ber":
        table, conf = run_ber_sweep(cfg)
        written.append(table.write(out))
        if conf:
            _json_dump(out / "confusion.json", {"per_es_n0_db": conf}, cfg)
            written.append(out / "confusion.json")
    elif cfg.kind == "classify":
        table, conf, model = run_classifier_study(cfg)
        written.append(table.write(out))
        _json_dump(out / "confusion.json", {"per_es_n0_db": conf}, cfg)
        doc = json.loads(model.to_json())
        doc["experiment"] = {"config": cfg.to_flat(), "seed": cfg.seed}
        (out / "model.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        written += [out / "confusion.json", out / "model.json"]
    elif cfg.kind == "mapping-ber":
        written.append(run_mapping_ber(cfg).write(out))
    elif cfg.kind == "complexity":
        written.append(run_complexity(cfg).write(out))
    else:
        run_gen_dataset(cfg, out)
        written += [out / "dataset.bin", out / "manifest.csv"]
    return written
