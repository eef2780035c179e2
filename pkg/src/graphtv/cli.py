"""Command-line front end: synth / build-graph / solve / eval / experiment.

The pipeline is deliberately staged around files — features CSV, graph
binary, seed CSV, scores CSV — so the expensive graph build is cached on
disk and the solver can be re-run across many partitions of the same graph.
Every command writes the fully resolved configuration (defaults expanded)
as a ``*.config.json`` next to its primary output; re-running the command
with ``--config <that file>`` reproduces the run byte for byte.

Exit codes: 0 success, 2 usage/validation, 3 non-convergence (outputs are
still written), 4 numerical failure.  Log verbosity comes from the
``GRAPHX_LOG`` environment variable (error|warn|info|debug, default warn);
logs go to stderr, data to stdout and files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import (
    LabeledDataset,
    load_features_csv,
    load_labels_csv,
    synth_sbm,
    synth_two_moons,
    truth_from_pairs,
    write_features_csv,
    write_labels_csv,
)
from .errors import (
    DegenerateStateError,
    GraphTVError,
    NoConvergenceError,
    NonFiniteError,
    ParseError,
)
from .evaluation import (
    evaluate,
    stability_experiment,
    write_report_csv,
    write_report_json,
)
from .graph import KernelSpec, build_knn_graph, load_graph, save_graph
from .solver import (
    LabelConstraints,
    SolverConfig,
    read_scores_csv,
    solve,
    write_scores_csv,
    write_trace_json,
)

log = logging.getLogger("graphtv.cli")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_NUMERICAL = 4

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class UsageError(Exception):
    """Bad flag combination or value detected after argument parsing."""


# --------------------------------------------------------------------------
# run configuration


_RC_KEYS = ("command", "version", "parameters", "inputs", "outputs")


@dataclasses.dataclass
class RunConfig:
    """Fully resolved record of one CLI run.

    ``parameters`` holds every tunable with defaults expanded, ``inputs``
    and ``outputs`` the file paths by role.  The JSON form is canonical
    (sorted keys, fixed indentation) so identical runs produce identical
    bytes, and unknown keys are rejected on load so a stale or hand-edited
    file fails loudly instead of being silently ignored.
    """

    command: str
    parameters: dict
    inputs: dict
    outputs: dict
    version: str = __version__

    def to_json(self):
        doc = {
            "command": self.command,
            "version": self.version,
            "parameters": self.parameters,
            "inputs": self.inputs,
            "outputs": self.outputs,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"run config is not valid JSON: {exc}", line=exc.lineno)
        if not isinstance(doc, dict):
            raise ParseError("run config must be a JSON object", line=1)
        unknown = sorted(set(doc) - set(_RC_KEYS))
        if unknown:
            raise ParseError(f"unknown run-config keys: {unknown}", line=1)
        missing = sorted(set(_RC_KEYS) - set(doc) - {"version"})
        if missing:
            raise ParseError(f"run config is missing keys: {missing}", line=1)
        if not isinstance(doc["command"], str):
            raise ParseError("run-config 'command' must be a string", line=1)
        for section in ("parameters", "inputs", "outputs"):
            if not isinstance(doc[section], dict):
                raise ParseError(f"run-config '{section}' must be an object", line=1)
        return cls(
            command=doc["command"],
            parameters=doc["parameters"],
            inputs=doc["inputs"],
            outputs=doc["outputs"],
            version=str(doc.get("version", __version__)),
        )

    @classmethod
    def load(cls, path):
        with open(path, "r") as fh:
            return cls.from_json(fh.read())


def _sidecar_path(primary):
    return Path(primary).with_suffix(".config.json")


# --------------------------------------------------------------------------
# option tables
#
# Every flag is declared once, with its role (parameter vs input/output
# path), type, and default.  argparse itself keeps all defaults at None so
# we can tell "user passed the flag" from "fall back to --config, then to
# the declared default" — that three-way merge is what makes replay work.


@dataclasses.dataclass(frozen=True)
class _Opt:
    dest: str
    kind: str  # "param" | "in" | "out"
    type: object = str
    default: object = None
    required: bool = False
    choices: tuple | None = None
    help: str = ""

    @property
    def flag(self):
        return "--" + self.dest.replace("_", "-")


def _csv_ints(text):
    try:
        return [int(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


def _csv_floats(text):
    try:
        return [float(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _sigma_value(text):
    if str(text).lower() == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"sigma must be a float or 'auto', got {text!r}")


def _kernel_opts(k_default):
    return [
        _Opt("k", "param", int, k_default, required=k_default is None,
             help="neighbours per node"),
        _Opt("metric", "param", str, "euclidean", choices=("euclidean", "cosine")),
        _Opt("kernel", "param", str, "gaussian", choices=("gaussian", "binary")),
        _Opt("sigma", "param", _sigma_value, "auto",
             help="gaussian bandwidth, or 'auto'"),
        _Opt("symmetrize", "param", str, "mean", choices=("mean", "max")),
    ]


_SOLVER_OPTS = [
    _Opt("epsilon", "param", float, 0.1, help="seed margin"),
    _Opt("dt", "param", float, 1.0),
    _Opt("sigma0", "param", float, 1.9),
    _Opt("tau0", "param", float, 1.9),
    _Opt("step_rule", "param", str, "heuristic", choices=("heuristic", "safeguarded")),
    _Opt("inner_max", "param", int, 2000),
    _Opt("inner_tol", "param", float, 1e-8),
    _Opt("outer_max", "param", int, 100),
    _Opt("outer_tol", "param", float, 1e-6),
    _Opt("seed", "param", int, 0, help="rng seed for the unlabeled-row init"),
]

_COMMANDS = {
    "synth two-moons": [
        _Opt("n", "param", int, 500),
        _Opt("noise", "param", float, 0.1),
        _Opt("seed", "param", int, 0),
        _Opt("out_features", "out", str, required=True),
        _Opt("out_truth", "out", str, required=True),
    ],
    "synth sbm": [
        _Opt("sizes", "param", _csv_ints, required=True, help="e.g. 20,20"),
        _Opt("p_in", "param", float, required=True),
        _Opt("p_out", "param", float, required=True),
        _Opt("seed", "param", int, 0),
        _Opt("out_graph", "out", str, required=True),
        _Opt("out_truth", "out", str, required=True),
    ],
    "build-graph": [
        _Opt("features", "in", str, required=True),
        *_kernel_opts(None),
        _Opt("out", "out", str, required=True),
    ],
    "solve": [
        _Opt("graph", "in", str, required=True),
        _Opt("labels", "in", str, required=True, help="seed CSV (node,class)"),
        _Opt("classes", "param", int, help="default: max class in labels + 1"),
        *_SOLVER_OPTS,
        _Opt("out_scores", "out", str, required=True),
        _Opt("out_trace", "out", str),
    ],
    "eval": [
        _Opt("scores", "in", str, required=True),
        _Opt("truth", "in", str, required=True, help="full truth CSV (node,class)"),
        _Opt("labels", "in", str, required=True, help="seed CSV; excluded from metrics"),
        _Opt("epsilon", "param", float, 0.1),
        _Opt("report", "out", str, required=True),
    ],
    "experiment": [
        _Opt("features", "in", str),
        _Opt("graph", "in", str),
        _Opt("truth", "in", str, required=True),
        _Opt("classes", "param", int, help="default: max class in truth + 1"),
        *_kernel_opts(10),
        _Opt("fractions", "param", _csv_floats, required=True),
        _Opt("seeds", "param", _csv_ints, required=True),
        *[o for o in _SOLVER_OPTS if o.dest != "seed"],
        _Opt("jobs", "param", int, 1),
        _Opt("report", "out", str, required=True),
        _Opt("report_csv", "out", str),
    ],
}

# primary output per command: the resolved config lands beside this file
_PRIMARY_OUT = {
    "synth two-moons": "out_features",
    "synth sbm": "out_graph",
    "build-graph": "out",
    "solve": "out_scores",
    "eval": "report",
    "experiment": "report",
}


def _resolve(command, args):
    """Merge CLI flags over --config values over declared defaults."""
    loaded = None
    if getattr(args, "config", None) is not None:
        loaded = RunConfig.load(args.config)
        if loaded.command != command:
            raise UsageError(
                f"--config is for '{loaded.command}', not '{command}'"
            )
    sections = {"param": {}, "in": {}, "out": {}}
    for opt in _COMMANDS[command]:
        value = getattr(args, opt.dest)
        if value is None and loaded is not None:
            for sect in (loaded.parameters, loaded.inputs, loaded.outputs):
                if opt.dest in sect and sect[opt.dest] is not None:
                    value = sect[opt.dest]
                    break
        if value is None:
            value = opt.default
        if value is None and opt.required:
            raise UsageError(f"{opt.flag} is required")
        sections[opt.kind][opt.dest] = value
    return RunConfig(
        command=command,
        parameters=sections["param"],
        inputs=sections["in"],
        outputs=sections["out"],
    )


def _solver_config(params):
    return SolverConfig(
        dt=float(params["dt"]),
        sigma0=float(params["sigma0"]),
        tau0=float(params["tau0"]),
        inner_max=int(params["inner_max"]),
        inner_tol=float(params["inner_tol"]),
        outer_max=int(params["outer_max"]),
        outer_tol=float(params["outer_tol"]),
        seed=int(params.get("seed", 0)),
        step_rule=str(params["step_rule"]),
    )


def _kernel_spec(params):
    sigma = params["sigma"]
    return KernelSpec(
        k=int(params["k"]),
        metric=str(params["metric"]),
        kernel=str(params["kernel"]),
        sigma=None if sigma == "auto" else float(sigma),
        symmetrization=str(params["symmetrize"]),
    )


# --------------------------------------------------------------------------
# commands


def cmd_synth(rc):
    p = rc.parameters
    if rc.command == "synth two-moons":
        features, truth = synth_two_moons(int(p["n"]), float(p["noise"]), int(p["seed"]))
        write_features_csv(rc.outputs["out_features"], features)
    else:
        graph, truth = synth_sbm(
            tuple(int(s) for s in p["sizes"]), float(p["p_in"]),
            float(p["p_out"]), int(p["seed"]),
        )
        save_graph(graph, rc.outputs["out_graph"])
    write_labels_csv(rc.outputs["out_truth"], np.arange(truth.size), truth)
    rc.write(_sidecar_path(rc.outputs[_PRIMARY_OUT[rc.command]]))
    log.info("synthesized %d nodes", truth.size)
    return EXIT_OK


def cmd_build_graph(rc):
    features = load_features_csv(rc.inputs["features"])
    graph = build_knn_graph(features, _kernel_spec(rc.parameters))
    save_graph(graph, rc.outputs["out"])
    rc.write(_sidecar_path(rc.outputs["out"]))
    deg = graph.degrees
    print(
        f"n={graph.n} edges={graph.num_edges} "
        f"degree_min={deg.min():.6g} degree_mean={deg.mean():.6g} "
        f"degree_max={deg.max():.6g}"
    )
    return EXIT_OK


def cmd_solve(rc):
    graph = load_graph(rc.inputs["graph"])
    nodes, classes = load_labels_csv(rc.inputs["labels"])
    n_classes = rc.parameters["classes"]
    if n_classes is None:
        n_classes = int(max(classes)) + 1 if len(classes) else 0
        rc.parameters["classes"] = n_classes
    constraints = LabelConstraints.from_pairs(
        nodes, classes, graph.n, int(n_classes), float(rc.parameters["epsilon"])
    )
    prediction, trace = solve(graph, constraints, _solver_config(rc.parameters))
    write_scores_csv(rc.outputs["out_scores"], prediction)
    if rc.outputs["out_trace"] is not None:
        write_trace_json(rc.outputs["out_trace"], trace)
    rc.write(_sidecar_path(rc.outputs["out_scores"]))
    log.info(
        "solve finished: %d outer steps, converged=%s, stop=%s",
        len(trace.records), trace.converged, trace.stop_reason,
    )
    return EXIT_OK if trace.converged else EXIT_NO_CONVERGENCE


def cmd_eval(rc):
    prediction = read_scores_csv(rc.inputs["scores"])
    n, n_classes = prediction.scores.shape
    truth = truth_from_pairs(*load_labels_csv(rc.inputs["truth"]), n)
    seed_nodes, seed_classes = load_labels_csv(rc.inputs["labels"])
    constraints = LabelConstraints.from_pairs(
        seed_nodes, seed_classes, n, n_classes, float(rc.parameters["epsilon"])
    )
    report = evaluate(prediction, truth, constraints)
    with open(rc.outputs["report"], "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    rc.write(_sidecar_path(rc.outputs["report"]))
    print(f"accuracy={report.accuracy:.6g} average_auc={report.average_auc:.6g}")
    return EXIT_OK


def cmd_experiment(rc):
    p = rc.parameters
    if (rc.inputs["features"] is None) == (rc.inputs["graph"] is None):
        raise UsageError("exactly one of --features / --graph is required")
    nodes, classes = load_labels_csv(rc.inputs["truth"])
    truth = truth_from_pairs(nodes, classes, len(nodes))
    n_classes = p["classes"]
    if n_classes is None:
        n_classes = int(truth.max()) + 1
        p["classes"] = n_classes
    kernel = None
    if rc.inputs["features"] is not None:
        dataset = LabeledDataset(
            truth=truth, n_classes=int(n_classes),
            features=load_features_csv(rc.inputs["features"]),
        )
        kernel = _kernel_spec(p)
    else:
        dataset = LabeledDataset(
            truth=truth, n_classes=int(n_classes),
            graph=load_graph(rc.inputs["graph"]),
        )
    report = stability_experiment(
        dataset,
        fractions=[float(f) for f in p["fractions"]],
        seeds=[int(s) for s in p["seeds"]],
        config=_solver_config(p),
        kernel=kernel,
        epsilon=float(p["epsilon"]),
        jobs=int(p["jobs"]),
    )
    write_report_json(rc.outputs["report"], report)
    if rc.outputs["report_csv"] is not None:
        write_report_csv(rc.outputs["report_csv"], report)
    rc.write(_sidecar_path(rc.outputs["report"]))
    return EXIT_OK


_HANDLERS = {
    "synth two-moons": cmd_synth,
    "synth sbm": cmd_synth,
    "build-graph": cmd_build_graph,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
}


# --------------------------------------------------------------------------
# parser / entry point


def _attach(parser, command):
    parser.add_argument(
        "--config", default=None, metavar="JSON",
        help="resolved run-config file to replay; explicit flags override it",
    )
    for opt in _COMMANDS[command]:
        kwargs = {"default": None, "help": opt.help or None, "metavar": opt.dest.upper()}
        if opt.choices is not None:
            kwargs["choices"] = opt.choices
            del kwargs["metavar"]
        if opt.kind == "param" and opt.type is not str:
            kwargs["type"] = opt.type
        parser.add_argument(opt.flag, **kwargs)
    parser.set_defaults(command=command)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="graphtv",
        description="transductive labeling by total-variation ratio descent",
    )
    parser.add_argument("--version", action="version", version=f"graphtv {__version__}")
    sub = parser.add_subparsers(dest="_top", required=True)

    synth = sub.add_parser("synth", help="generate a benchmark dataset")
    gen = synth.add_subparsers(dest="_gen", required=True)
    _attach(gen.add_parser("two-moons", help="two interleaved half-circles"), "synth two-moons")
    _attach(gen.add_parser("sbm", help="stochastic block model graph"), "synth sbm")

    _attach(sub.add_parser("build-graph", help="k-NN graph from a features CSV"), "build-graph")
    _attach(sub.add_parser("solve", help="label a graph from seed nodes"), "solve")
    _attach(sub.add_parser("eval", help="heldout accuracy and AUC of a scores file"), "eval")
    _attach(sub.add_parser("experiment", help="fraction x seed stability grid"), "experiment")
    return parser


def main(argv=None):
    raw = os.environ.get("GRAPHX_LOG", "warn").lower()
    if raw not in _LOG_LEVELS:
        print(
            f"error: GRAPHX_LOG must be one of {'|'.join(_LOG_LEVELS)}, got {raw!r}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    logging.basicConfig(
        level=_LOG_LEVELS[raw],
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        rc = _resolve(args.command, args)
        return _HANDLERS[args.command](rc)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonFiniteError, DegenerateStateError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NoConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (GraphTVError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
