"""Experiment configuration and the prepare / train / evaluate pipeline.

Configuration is an INI file with sections ``data``, ``grouping`` (optional),
``embedding``, ``lda``, ``wegan``, ``degan``, ``eval`` and ``output``.  All
artifacts land under the output directory:

    prepare/   vocabulary, tf-idf store, word2vec files, LDA matrix, manifest
    runs/      per model and seed: checkpoint, metrics CSV, final outputs
    eval/      metrics CSV, summary table, significance, synonyms, projections
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import degan as degan_mod
from . import wegan as wegan_mod
from .embedding import (
    EmbeddingMatrix,
    SkipGramConfig,
    doc_embed_matrix,
    load_embeddings,
    save_word2vec,
    synonym_drift,
    train_skipgram,
    write_synonym_report,
)
from .evaluate import (
    compare_runs,
    export_projection,
    ffnn_from_discriminator,
    ffnn_from_embeddings,
    finetune_classifier,
    format_table,
    kmeans,
    rand_index,
)
from .lda import TopicWordMatrix, fit_lda, log_init, topic_summaries
from .text import (
    NEWSGROUPS_GROUPS,
    REUTERS_CATEGORIES,
    TfIdfDoc,
    Vocabulary,
    count_matrix,
    load_directory_corpora,
    load_labelled_lines,
    prepare_corpora,
    tokenize,
    top_terms,
)

logger = logging.getLogger(__name__)


@dataclass
class DataConfig:
    root: str = ""
    layout: str = "directory"  # directory | lines
    train_file: str = ""
    test_file: str = ""
    grouping: str = "none"  # none | newsgroups | reuters | custom
    manifest: str = ""
    split_ratios: tuple = (0.78, 0.10, 0.12)
    split_seed: int = 0
    max_train_per_corpus: int = 0
    v_max: int = 5000


@dataclass
class LdaConfig:
    topics: int = 50
    alpha: float = 0.0  # 0 means 50 / topics
    beta: float = 0.01
    iters: int = 1000
    seed: int = 0
    floor: float = 1e-8


@dataclass
class WeganSection:
    epochs: int = 100
    batch_per_corpus: int = 50
    lr_start: float = 0.01
    lr_end: float = 1.0
    classifier_hidden: int = 50
    discriminator_hidden: int = 10
    checkpoint_every: int = 10


@dataclass
class DeganSection:
    noise_dim: int = 50
    topics: int = 50
    disc_hidden: int = 50
    lr_D: float = 0.1
    lr_G: float = 0.001
    batch_per_corpus: int = 50
    epochs: int = 100
    checkpoint_every: int = 10


@dataclass
class EvalConfig:
    seeds: tuple = (1, 2, 3, 4, 5)
    finetune_epochs: int = 500
    finetune_lr: float = 0.1
    finetune_batch: int = 50
    synonym_k: int = 10
    synonym_terms: tuple = ()
    projection_samples: int = 100
    cluster_split: str = "test"


@dataclass
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    grouping: dict = field(default_factory=dict)
    embedding: SkipGramConfig = field(default_factory=SkipGramConfig)
    lda: LdaConfig = field(default_factory=LdaConfig)
    wegan: WeganSection = field(default_factory=WeganSection)
    degan: DeganSection = field(default_factory=DeganSection)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output: str = "out"
    base_dir: str = "."

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    @property
    def out(self) -> Path:
        return self.resolve(self.output)

    def hash(self, *sections: str) -> str:
        blob = {s: _plain(getattr(self, s)) for s in (sections or (
            "data", "grouping", "embedding", "lda", "wegan", "degan", "eval"))}
        return hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()[:16]

    def validate(self) -> None:
        d = self.data
        if d.layout == "directory":
            if not self.resolve(d.root).is_dir():
                raise FileNotFoundError(f"corpus directory not found: {self.resolve(d.root)}")
        elif d.layout == "lines":
            for f in (d.train_file, d.test_file):
                if not self.resolve(f).is_file():
                    raise FileNotFoundError(f"corpus file not found: {self.resolve(f)}")
        else:
            raise ValueError(f"unknown data layout {d.layout!r}")
        if d.manifest and not self.resolve(d.manifest).is_file():
            raise FileNotFoundError(f"manifest not found: {self.resolve(d.manifest)}")
        if not self.eval.seeds:
            raise ValueError("eval seed list is empty")
        if self.lda.topics != self.degan.topics:
            raise ValueError("lda.topics must equal degan.topics")
        if d.grouping == "custom" and not self.grouping:
            raise ValueError("grouping = custom needs a [grouping] section")


def _plain(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, (tuple, list)):
        return [_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    return obj


def _coerce(value: str, default):
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        items = [v.strip() for v in value.split(",") if v.strip()]
        if default and isinstance(default[0], int):
            return tuple(int(v) for v in items)
        if default and isinstance(default[0], float):
            return tuple(float(v) for v in items)
        return tuple(items)
    return value.strip()


def _fill(dc, section) -> object:
    known = {f.name for f in fields(dc)}
    kwargs = {}
    for key, value in section.items():
        if key not in known:
            raise ValueError(f"unknown key {key!r} in section [{section.name}]")
        kwargs[key] = _coerce(value, getattr(dc, key))
    return type(dc)(**{**asdict(dc), **kwargs}) if kwargs else dc


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not parser.read(path, encoding="utf-8"):
        raise FileNotFoundError(f"config not found: {path}")
    cfg = ExperimentConfig(base_dir=str(Path(path).resolve().parent))
    for name in ("data", "embedding", "lda", "wegan", "degan", "eval"):
        if parser.has_section(name):
            setattr(cfg, name, _fill(getattr(cfg, name), parser[name]))
    if parser.has_section("grouping"):
        cfg.grouping = {k: tuple(v.strip() for v in val.split(",") if v.strip())
                        for k, val in parser["grouping"].items()}
    if parser.has_section("output"):
        cfg.output = parser["output"].get("dir", cfg.output)
    unknown = set(parser.sections()) - {"data", "grouping", "embedding", "lda", "wegan", "degan", "eval", "output"}
    if unknown:
        raise ValueError(f"unknown config sections {sorted(unknown)}")
    return cfg


# ---------------------------------------------------------------------------
# helpers


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_files(cfg: ExperimentConfig) -> list[Path]:
    d = cfg.data
    if d.layout == "lines":
        files = [cfg.resolve(d.train_file), cfg.resolve(d.test_file)]
    else:
        root = cfg.resolve(d.root)
        files = sorted(p for p in root.rglob("*") if p.is_file())
    if d.manifest:
        files.append(cfg.resolve(d.manifest))
    return files


def _input_hash(cfg: ExperimentConfig) -> str:
    h = hashlib.sha256()
    for p in _input_files(cfg):
        h.update(str(p).encode())
        h.update(file_hash(p).encode())
    return h.hexdigest()


def _grouping(cfg: ExperimentConfig):
    g = cfg.data.grouping
    if g == "newsgroups":
        return NEWSGROUPS_GROUPS
    if g == "reuters":
        return {c: (c,) for c in REUTERS_CATEGORIES}
    if g == "custom":
        return cfg.grouping
    return None


def load_raw_corpora(cfg: ExperimentConfig):
    d = cfg.data
    cap = d.max_train_per_corpus or None
    if d.layout == "lines":
        val_share = d.split_ratios[1] / (d.split_ratios[0] + d.split_ratios[1])
        return load_labelled_lines(
            {"train": cfg.resolve(d.train_file), "test": cfg.resolve(d.test_file)},
            _grouping(cfg), val_share=val_share, seed=d.split_seed, max_train_per_corpus=cap)
    return load_directory_corpora(
        cfg.resolve(d.root), _grouping(cfg), manifest=cfg.resolve(d.manifest) if d.manifest else None,
        ratios=d.split_ratios, seed=d.split_seed, max_train_per_corpus=cap)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(h, "")) for h in header])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# prepared data


@dataclass
class Prepared:
    vocab: Vocabulary
    names: list[str]
    T: sp.csr_matrix
    corpus_ids: np.ndarray
    labels: np.ndarray
    splits: np.ndarray
    degenerate: np.ndarray
    E_all: EmbeddingMatrix
    E_corpus: list[EmbeddingMatrix]
    lda: TopicWordMatrix

    @property
    def n_corpora(self) -> int:
        return len(self.names)

    def idx(self, split: str) -> np.ndarray:
        return np.flatnonzero(self.splits == split)


PREPARE_FILES = ("vocab.tsv", "docs.npz", "corpora.json", "embeddings/all.w2v.txt", "lda_phi.tsv", "lda_topics.txt")


def cmd_prepare(cfg: ExperimentConfig) -> dict:
    """Tokenize, vectorize, train word2vec per corpus and pooled, fit LDA.

    Skipped when the recorded input and config hashes match and every output
    file still has its recorded hash.
    """
    cfg.validate()
    out = cfg.out / "prepare"
    manifest_path = out / "manifest.json"
    input_hash = _input_hash(cfg)
    config_hash = cfg.hash("data", "grouping", "embedding", "lda")
    if manifest_path.is_file():
        old = json.loads(manifest_path.read_text())
        if (old.get("input_hash") == input_hash and old.get("config_hash") == config_hash
                and all((out / f).is_file() and file_hash(out / f) == h for f, h in old["outputs"].items())):
            logger.info("prepare: inputs unchanged, nothing to do")
            return {"status": "unchanged", "manifest": old}

    (out / "embeddings").mkdir(parents=True, exist_ok=True)
    raw = load_raw_corpora(cfg)
    pc = prepare_corpora(raw, cfg.data.v_max)
    V = len(pc.vocab)
    pc.vocab.save(out / "vocab.tsv")
    T = pc.matrix()
    np.savez(
        out / "docs.npz",
        data=T.data, indices=T.indices, indptr=T.indptr, shape=np.array(T.shape),
        corpus_ids=pc.corpus_ids(), labels=pc.labels(),
        splits=np.array([d.split for d in pc.docs]), degenerate=np.array([d.degenerate for d in pc.docs]),
    )
    _write_json(out / "corpora.json", {"names": pc.names, "config_hash": config_hash,
                                        "documents": {s: len(pc.select(s)) for s in ("train", "validation", "test")}})
    train = pc.select("train")
    emb = cfg.embedding
    E_all = train_skipgram([pc.token_ids[i] for i in train], V, emb, "trained-all")
    save_word2vec(out / "embeddings/all.w2v.txt", E_all, pc.vocab.terms)
    outputs = list(PREPARE_FILES)
    for m in range(pc.n_corpora):
        docs_m = [pc.token_ids[i] for i in train if pc.docs[i].corpus_id == m]
        cfg_m = SkipGramConfig(**{**asdict(emb), "seed": emb.seed + 1 + m})
        E_m = train_skipgram(docs_m, V, cfg_m, f"trained-per-corpus {m}")
        save_word2vec(out / f"embeddings/corpus_{m}.w2v.txt", E_m, pc.vocab.terms)
        outputs.append(f"embeddings/corpus_{m}.w2v.txt")
    lc = cfg.lda
    counts = count_matrix([pc.token_ids[i] for i in train], V)
    tw = fit_lda(counts, lc.topics, lc.alpha or None, lc.beta, lc.iters, lc.seed)
    tw.save(out / "lda_phi.tsv")
    (out / "lda_topics.txt").write_text(topic_summaries(tw, pc.vocab.terms), encoding="utf-8")
    manifest = {
        "input_hash": input_hash,
        "config_hash": config_hash,
        "n_corpora": pc.n_corpora,
        "vocabulary_size": V,
        "outputs": {f: file_hash(out / f) for f in outputs},
    }
    _write_json(manifest_path, manifest)
    return {"status": "written", "manifest": manifest}


def load_prepared(cfg: ExperimentConfig) -> Prepared:
    out = cfg.out / "prepare"
    if not (out / "manifest.json").is_file():
        raise FileNotFoundError(f"no prepared data under {out}; run 'prepare' first")
    vocab = Vocabulary.load(out / "vocab.tsv")
    z = np.load(out / "docs.npz")
    T = sp.csr_matrix((z["data"], z["indices"], z["indptr"]), shape=tuple(z["shape"]))
    names = json.loads((out / "corpora.json").read_text())["names"]
    E_all, _ = load_embeddings(out / "embeddings/all.w2v.txt", vocab, provenance="trained-all")
    E_corpus = [load_embeddings(out / f"embeddings/corpus_{m}.w2v.txt", vocab, provenance=f"trained-per-corpus {m}")[0]
                for m in range(len(names))]
    return Prepared(vocab, names, T, z["corpus_ids"], z["labels"], z["splits"], z["degenerate"],
                    E_all, E_corpus, TopicWordMatrix.load(out / "lda_phi.tsv"))


# ---------------------------------------------------------------------------
# training


def _run_dir(cfg, model, seed) -> Path:
    return cfg.out / "runs" / model / f"seed_{seed}"


def _run_hash(cfg: ExperimentConfig, model: str) -> str:
    return cfg.hash("data", "grouping", "embedding", "lda", model)


class _Interrupted(Exception):
    pass


def cmd_train(cfg: ExperimentConfig, model: str, stop_after_epoch: int | None = None) -> list[Path]:
    """Train ``model`` (wegan | degan) for every configured seed.

    A run whose ``run.json`` matches the config hash is skipped; a run with a
    matching checkpoint resumes from the checkpoint epoch.  ``stop_after_epoch``
    simulates an interruption (used by tests).
    """
    if model not in ("wegan", "degan"):
        raise ValueError(f"unknown model {model!r}")
    prep = load_prepared(cfg)
    run_hash = _run_hash(cfg, model)
    dirs = []
    for seed in cfg.eval.seeds:
        d = _run_dir(cfg, model, seed)
        d.mkdir(parents=True, exist_ok=True)
        dirs.append(d)
        done = d / "run.json"
        if done.is_file() and json.loads(done.read_text()).get("config_hash") == run_hash:
            logger.info("%s seed %d already trained", model, seed)
            continue
        try:
            if model == "wegan":
                _train_wegan_seed(cfg, prep, seed, d, run_hash, stop_after_epoch)
            else:
                _train_degan_seed(cfg, prep, seed, d, run_hash, stop_after_epoch)
        except _Interrupted:
            logger.warning("%s seed %d interrupted after epoch %d", model, seed, stop_after_epoch)
            raise
        except Exception as exc:
            raise RuntimeError(f"{model} training failed for seed {seed}: {exc}") from exc
    return dirs


def _checkpoint_hook(cfg_every, total, save, stop_after_epoch):
    def hook(state):
        if state.epoch == total or (cfg_every and state.epoch % cfg_every == 0) or state.epoch == stop_after_epoch:
            save(state)
        if stop_after_epoch is not None and state.epoch >= stop_after_epoch:
            raise _Interrupted()
    return hook


def _train_wegan_seed(cfg, prep: Prepared, seed, d: Path, run_hash, stop_after_epoch):
    w = cfg.wegan
    wc = wegan_mod.WeganConfig(epochs=w.epochs, batch_per_corpus=w.batch_per_corpus, lr_start=w.lr_start,
                               lr_end=w.lr_end, classifier_hidden=w.classifier_hidden,
                               discriminator_hidden=w.discriminator_hidden, seed=seed,
                               n_labels=int(prep.labels.max()) + 1)
    tr = prep.idx("train")
    ckpt = d / "checkpoint.ckpt"
    state = None
    if ckpt.is_file():
        arrays_meta = wegan_mod.load_checkpoint(ckpt)[1]
        if arrays_meta.get("config_hash") == run_hash:
            state = wegan_mod.load_state(ckpt, prep.E_corpus)
            logger.info("resuming wegan seed %d from epoch %d", seed, state.epoch)

    def save(st):
        wegan_mod.save_state(ckpt, st, config_hash=run_hash, seed=seed)

    state = wegan_mod.train_wegan(prep.T[tr], prep.corpus_ids[tr], prep.labels[tr], prep.E_corpus, prep.E_all, wc,
                                  state=state, on_epoch=_checkpoint_hook(w.checkpoint_every, w.epochs, save,
                                                                         stop_after_epoch))
    if state.epoch == 0:
        save(state)
    header = ["config_hash", "seed", "epoch", "disc_loss", "gen_loss", "classifier_loss", "disc_accuracy", "lr"]
    _write_csv(d / "metrics.csv", header, [dict(h, config_hash=run_hash, seed=seed) for h in state.history])
    save_word2vec(d / "G.w2v.txt", state.G, prep.vocab.terms)
    _finish_run(d, run_hash, seed, ["checkpoint.ckpt", "metrics.csv", "G.w2v.txt"])


def _train_degan_seed(cfg, prep: Prepared, seed, d: Path, run_hash, stop_after_epoch):
    g = cfg.degan
    dc = degan_mod.DeganConfig(noise_dim=g.noise_dim, topics=g.topics, disc_hidden=g.disc_hidden, lr_D=g.lr_D,
                               lr_G=g.lr_G, batch_per_corpus=g.batch_per_corpus, epochs=g.epochs, seed=seed)
    tr = prep.idx("train")
    ckpt = d / "checkpoint.ckpt"
    state = None
    if ckpt.is_file() and degan_mod.load_checkpoint(ckpt)[1].get("config_hash") == run_hash:
        state = degan_mod.load_state(ckpt)
        logger.info("resuming degan seed %d from epoch %d", seed, state.epoch)

    def save(st):
        degan_mod.save_state(ckpt, st, config_hash=run_hash, seed=seed)

    lda_log = log_init(prep.lda, cfg.lda.floor)
    state = degan_mod.train_degan(prep.T[tr], prep.corpus_ids[tr], dc, lda_log, prep.E_all, state=state,
                                  on_epoch=_checkpoint_hook(g.checkpoint_every, g.epochs, save, stop_after_epoch))
    if state.epoch == 0:
        save(state)
    M = prep.n_corpora
    header = ["config_hash", "seed", "epoch", "disc_loss", "gen_loss", "real_accuracy", "target_prob"] + [
        f"real_accuracy_{m}" for m in range(M)]
    _write_csv(d / "metrics.csv", header, [dict(h, config_hash=run_hash, seed=seed) for h in state.history])
    degan_mod.write_samples(d / "samples.tsv", state.gens, prep.vocab.terms, prep.names, seed=seed)
    _finish_run(d, run_hash, seed, ["checkpoint.ckpt", "metrics.csv", "samples.tsv"])


def _finish_run(d: Path, run_hash, seed, files):
    _write_json(d / "run.json", {"config_hash": run_hash, "seed": seed,
                                 "files": {f: file_hash(d / f) for f in files}})


# ---------------------------------------------------------------------------
# evaluation


def cmd_evaluate(cfg: ExperimentConfig) -> dict:
    """Finetuned accuracies, Rand indices, significance, synonym drift and projections."""
    prep = load_prepared(cfg)
    ev = cfg.eval
    out = cfg.out / "eval"
    out.mkdir(parents=True, exist_ok=True)
    config_hash = cfg.hash()
    K = int(prep.labels.max()) + 1
    M = prep.n_corpora
    splits = {s: (prep.T[prep.idx(s)], prep.labels[prep.idx(s)]) for s in ("train", "validation", "test")}
    cl = prep.idx(ev.cluster_split)
    cl = cl[~prep.degenerate[cl]]

    available = {}
    for model in ("wegan", "degan"):
        runs = [_run_dir(cfg, model, s) / "run.json" for s in ev.seeds]
        available[model] = all(r.is_file() for r in runs)
        if not available[model]:
            logger.warning("%s checkpoints missing; its columns will be absent", model)

    def ri(E, seed):
        X = doc_embed_matrix(prep.T[cl], E)
        res = kmeans(X, M, seed=seed)
        return rand_index(res.assignments, prep.corpus_ids[cl])

    rows = []
    cols = {"w2v-RI": [], "weGAN-RI": [], "w2v-accuracy": [], "weGAN-accuracy": [], "deGAN-accuracy": []}
    drift_rows = []
    hidden = cfg.wegan.classifier_hidden
    for seed in ev.seeds:
        def tune(model):
            return finetune_classifier(model, splits, ev.finetune_epochs, ev.finetune_lr, ev.finetune_batch, seed)

        base = tune(ffnn_from_embeddings(prep.E_all, K, hidden, seed))
        r = ri(prep.E_all, seed)
        rows.append({"arm": "w2v", "seed": seed, "rand_index": r, "accuracy": base.test_accuracy,
                     "best_epoch": base.best_epoch})
        cols["w2v-RI"].append(r)
        cols["w2v-accuracy"].append(base.test_accuracy)
        if available["wegan"]:
            st = wegan_mod.load_state(_run_dir(cfg, "wegan", seed) / "checkpoint.ckpt", prep.E_corpus)
            rep = tune(ffnn_from_embeddings(st.G, K, hidden, seed, head=st.C))
            r = ri(st.G, seed)
            rows.append({"arm": "weGAN", "seed": seed, "rand_index": r, "accuracy": rep.test_accuracy,
                         "best_epoch": rep.best_epoch})
            cols["weGAN-RI"].append(r)
            cols["weGAN-accuracy"].append(rep.test_accuracy)
            k = min(ev.synonym_k, len(prep.vocab) - 1)
            mean_diff, changed = synonym_drift(prep.E_all, st.G, k)
            drift_rows.append({"seed": seed, "k": k, "mean_differing": mean_diff, "changed_fraction": changed})
            if ev.synonym_terms:
                terms = [t for w in ev.synonym_terms for t in tokenize(w)]
                write_synonym_report(out / "synonyms_w2v.tsv", prep.E_all, prep.vocab, terms, k)
                write_synonym_report(out / f"synonyms_wegan_seed_{seed}.tsv", st.G, prep.vocab, terms, k)
        if available["degan"]:
            st = degan_mod.load_state(_run_dir(cfg, "degan", seed) / "checkpoint.ckpt")
            rep = tune(ffnn_from_discriminator(st.D, K, seed))
            rows.append({"arm": "deGAN", "seed": seed, "rand_index": "", "accuracy": rep.test_accuracy,
                         "best_epoch": rep.best_epoch})
            cols["deGAN-accuracy"].append(rep.test_accuracy)
            _degan_exports(cfg, prep, st, seed, out)

    for i, r in enumerate(rows):
        r.update(run_id=f"{r['arm']}-{r['seed']}", config_hash=config_hash)
    _write_csv(out / "metrics.csv", ["run_id", "config_hash", "seed", "arm", "rand_index", "accuracy", "best_epoch"],
               rows)
    if drift_rows:
        _write_csv(out / "synonym_drift.csv", ["config_hash", "seed", "k", "mean_differing", "changed_fraction"],
                   [dict(r, config_hash=config_hash) for r in drift_rows])
    summary = render_summary(cols, config_hash)
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    return {"columns": cols, "summary": summary}


def render_summary(cols: dict, config_hash: str = "") -> str:
    present = {k: (v if v else None) for k, v in cols.items()}
    text = f"# config_hash={config_hash}\n" + format_table(present) + "\n"
    pairs = [("weGAN-RI", "w2v-RI"), ("weGAN-accuracy", "w2v-accuracy"), ("deGAN-accuracy", "w2v-accuracy")]
    for treat, base in pairs:
        if cols.get(treat) and cols.get(base) and len(cols[treat]) >= 2 and len(cols[base]) >= 2:
            s = compare_runs(cols[treat], cols[base])
            flag = " (zero variance)" if s.zero_variance else ""
            text += f"{treat} vs {base}: t={s.welch_t:.4f} df={s.df:.2f} p={s.p_value:.4g}{flag}\n"
        else:
            text += f"{treat} vs {base}: absent\n"
    return text


def _degan_exports(cfg, prep: Prepared, st, seed, out: Path):
    te = prep.idx("test")
    te = te[~prep.degenerate[te]]
    rng = np.random.default_rng([seed, 5])
    n = cfg.eval.projection_samples
    vecs, groups = [], []
    for m, name in enumerate(prep.names):
        idx = te[prep.corpus_ids[te] == m]
        if len(idx):
            vecs.append(prep.T[idx].toarray())
            groups += [f"original:{name}"] * len(idx)
        fake = degan_mod.degan_generate(st.gens.generator(m), degan_mod.sample_noise(rng, n, st.gens.noise_dim))
        vecs.append(fake)
        groups += [f"deGAN:{name}"] * n
    export_projection(np.vstack(vecs), groups, out / f"projection_degan_seed_{seed}.tsv",
                      out / f"projection_degan_seed_{seed}.raw.tsv", n, seed)
    with open(out / f"bag_of_words_seed_{seed}.tsv", "w", encoding="utf-8") as fh:
        fh.write("corpus\tsource\ttop_terms\n")
        for m, name in enumerate(prep.names):
            idx = te[prep.corpus_ids[te] == m]
            if len(idx):
                orig = prep.T[int(rng.choice(idx))].toarray()[0]
                fh.write(f"{name}\toriginal\t{' '.join(top_terms(orig, prep.vocab))}\n")
            fake = degan_mod.degan_generate(st.gens.generator(m), degan_mod.sample_noise(rng, 1, st.gens.noise_dim))[0]
            fh.write(f"{name}\tdeGAN\t{' '.join(top_terms(fake, prep.vocab))}\n")


def cmd_report(cfg: ExperimentConfig) -> str:
    """Re-render the summary table from ``eval/metrics.csv``."""
    path = cfg.out / "eval" / "metrics.csv"
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found; run 'evaluate' first")
    cols = {"w2v-RI": [], "weGAN-RI": [], "w2v-accuracy": [], "weGAN-accuracy": [], "deGAN-accuracy": []}
    config_hash = ""
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            config_hash = row["config_hash"]
            arm = row["arm"]
            if row["rand_index"]:
                cols[f"{arm}-RI"].append(float(row["rand_index"]))
            cols[f"{arm}-accuracy"].append(float(row["accuracy"]))
    return render_summary(cols, config_hash)


def cmd_verify_prop1(p: list, out_path, cfg: degan_mod.Prop1Config, frozen: bool = False) -> dict:
    report = degan_mod.verify_proposition1([np.asarray(x, dtype=float) for x in p], cfg,
                                           frozen_q=p if frozen else None)
    if out_path:
        _write_json(out_path, report)
    return report
