"""Command-line interface.

Exit codes: 0 success, 1 inconclusive within budget, 2 precondition or
configuration error, 3 internal consistency violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from . import __version__
from .cayley import BudgetExceeded, HeuristicEngineError, build_ball, load_ball, save_ball
from .homology import CertificateError, ViewHomology
from .homotopy import ReplayError, fill_loop
from .normal_forms import FreeAbelianEngine, ProductZ2Engine, RewritingEngine, engine_from_name
from .presentations import PresentationSyntaxError, parse_presentation, parse_word
from .qi import QI_KINDS, TransportError, audit, builtin_qi
from .rips import PreconditionError, build_rips, certify_simply_connected, check_free_action, export_text
from .rewriting import Budget
from .vrate import ConsistencyError, MarginError, compare_v_rates, estimate_v_rate, qi_predicted_bound

EXIT_OK, EXIT_INCONCLUSIVE, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _engine(args, family: str | None = None):
    if family is None and getattr(args, "presentation", None):
        with open(args.presentation, encoding="utf-8") as fh:
            pres = parse_presentation(fh.read())
        eng = RewritingEngine.complete(pres, Budget(max_rules=args.kb_rules))
        if not eng.exact and not args.allow_heuristic:
            raise ConfigError("Knuth-Bendix completion did not finish within budget; pass --allow-heuristic to proceed uncertified")
        return eng
    return engine_from_name(family or args.family)


def _ball(args, engine, radius: int):
    if radius < 0:
        raise ConfigError("radius must be non-negative")
    cache = getattr(args, "cache", None)
    if cache and os.path.exists(cache):
        ball = load_ball(cache, engine, radius)
        if ball is not None:
            return ball
    ball = build_ball(engine, radius, budget_states=args.max_ball, allow_heuristic=args.allow_heuristic)
    if cache:
        save_ball(ball, cache)
    return ball


def _default_d(engine) -> int:
    r = engine.presentation.max_relator_length
    return max(1, r // 2 + 1)


def cmd_ball(args) -> int:
    eng = _engine(args)
    ball = build_ball(eng, args.radius, budget_states=args.max_ball, allow_heuristic=args.allow_heuristic)
    if args.out:
        save_ball(ball, args.out)
    sizes = []
    acc = 0
    for s in ball.sphere_sizes():
        acc += s
        sizes.append(acc)
    sys.stdout.write("sizes " + ",".join(map(str, sizes)) + "\n")
    return EXIT_OK


def cmd_rips(args) -> int:
    eng = _engine(args)
    d = args.d if args.d is not None else _default_d(eng)
    ball = _ball(args, eng, args.radius)
    skel = build_rips(ball, d, args.m)
    out = {"schema": "scirate.rips/1", "skeleton": skel.describe(), "counts": skel.counts(), "group": eng.presentation.to_text()}
    if args.m > 1 or ball.exhausted:
        out["free_action"] = check_free_action(skel)
    if args.out:
        _write(args.out, export_text(skel))
    sys.stdout.write(_dump(out))
    return EXIT_OK


def cmd_certify(args) -> int:
    eng = _engine(args)
    d = args.d if args.d is not None else _default_d(eng)
    r = eng.presentation.max_relator_length
    if 2 * d <= r:
        raise PreconditionError(f"simple connectivity of P_d needs 2d > r (longest relator r={r}); d={d} is below the threshold d >= {r // 2 + 1}")
    ball = _ball(args, eng, args.radius)
    materialize = args.m > 1 or ball.exhausted
    skel = build_rips(ball, d, args.m, materialize=materialize)
    rep = certify_simply_connected(
        skel, n_random=args.loops, max_length=args.max_length, seed=args.seed, budget=args.budget_states,
        region_radius=args.region,
    )
    if args.m > 1 or ball.exhausted:
        rep["free_action"] = check_free_action(skel)
    text = _dump(rep)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    sys.stderr.write(f"filled {rep['counts'].get('filled', 0)} of {len(rep['loops'])}\n")
    if rep["counts"].get("replay-failed"):
        return EXIT_INTERNAL
    if args.m > 1 and not rep["free_action"]["free"]:
        return EXIT_INCONCLUSIVE
    return EXIT_OK if rep["all_filled"] else EXIT_INCONCLUSIVE


def _parse_loop(text: str, ball, skel) -> tuple[int, ...]:
    names = ball.engine.presentation.names
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        w = () if tok in ("", "1", "e") else parse_word(tok, names)
        i = ball.locate(w)
        if i < 0:
            raise ConfigError(f"loop vertex {tok!r} lies outside the ball")
        out.append(skel.vid(i))
    return tuple(out)


def cmd_fill(args) -> int:
    eng = _engine(args)
    d = args.d if args.d is not None else _default_d(eng)
    ball = _ball(args, eng, args.radius)
    skel = build_rips(ball, d, args.m)
    if args.inner is None:
        view = skel.full()
    else:
        view = skel.annulus(args.inner, args.outer)
    loop = _parse_loop(args.loop, ball, skel)
    if not all(view.has_vertex(v) for v in loop):
        raise ConfigError("loop does not lie in the ambient view")
    hom = ViewHomology(view)
    res = fill_loop(loop, view, budget=args.budget_states, closure=hom.closure, homology=hom)
    if res.status == "filled" and any(hom.loop_class(loop)):
        raise ConsistencyError("filled a loop whose H1 class is nonzero")
    out = {"schema": "scirate.fill/1", "view": view.describe(), "result": res.to_json(), "truncation": f"relative to truncation B({skel.served})"}
    text = _dump(out)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_INCONCLUSIVE if res.status == "inconclusive" else EXIT_OK


def _estimate(args, family: str | None):
    eng = _engine(args, family)
    d = args.d if args.d is not None else _default_d(eng)
    radius = args.radius if args.radius is not None else 2 * args.rmax + 2
    ball = _ball(args, eng, radius) if family is None else build_ball(eng, radius, budget_states=args.max_ball)
    skel = build_rips(ball, d)
    policy = {"max_generators": args.max_generators, "random_loops": args.random_loops}
    est = estimate_v_rate(
        skel, range(args.rmin, args.rmax + 1), loop_radius=args.loop_radius, seed=args.seed,
        budget=args.budget_states, policy=policy, threads=args.threads,
    )
    return eng, ball, est


def _auto_kind(h_eng, g_eng) -> str:
    if h_eng.presentation.digest() == g_eng.presentation.digest():
        return "identity"
    if isinstance(h_eng, FreeAbelianEngine) and isinstance(g_eng, FreeAbelianEngine) and h_eng.dim == g_eng.dim:
        return "change_of_generators"
    if isinstance(g_eng, ProductZ2Engine) and g_eng.inner.presentation.digest() == h_eng.presentation.digest():
        return "product_embedding"
    raise ConfigError("no built-in quasi-isometry between these families; pass --qi KIND explicitly")


def cmd_vrate(args) -> int:
    if args.rmin > args.rmax:
        raise ConfigError("--rmin exceeds --rmax")
    eng, ball, est = _estimate(args, None)
    report = {"estimate": est.to_json()}
    code = EXIT_OK
    if any(r.inconclusive for r in est.rows):
        code = EXIT_INCONCLUSIVE
    if args.compare:
        h_eng, h_ball, est_h = _estimate(args, args.compare)
        report["compare"] = {"family": args.compare, "estimate": est_h.to_json(), "witness": compare_v_rates(est, est_h).to_json()}
        if args.qi:
            kind = _auto_kind(h_eng, eng) if args.qi == "auto" else args.qi
            fit_r = min(args.fit_radius, ball.radius // 2, h_ball.radius // 2)
            q = builtin_qi(kind, h_ball, ball, fit_r)
            aud = audit(q, n_pairs=args.pairs, radius=fit_r, seed=args.seed)
            pred = qi_predicted_bound(est, q.k, q.C, [r.r for r in est_h.rows], measured=est_h)
            report["qi"] = {"map": q.descriptor(), "audit": aud, "prediction": pred}
            sys.stderr.write(f"prediction consistency: {'PASS' if pred['consistent'] else 'FAIL'}\n")
            if not aud["passed"] or not pred["consistent"]:
                code = EXIT_INTERNAL
    csv_text = est.to_csv()
    if args.out:
        base, _ = os.path.splitext(args.out)
        _write(base + ".csv", csv_text)
        _write(base + ".json", _dump(report))
    sys.stdout.write(csv_text)
    if args.compare:
        w = report["compare"]["witness"]
        sys.stdout.write("equivalence " + ("shown " + json.dumps({"c": w["c"], "C": w["C"]}, sort_keys=True) if w["shown"] else "not shown") + "\n")
    for row in est.rows:
        if row.n_upper is None:
            sys.stdout.write(f"r={row.r}: no upper bound found; H1 witnesses at N={row.obstructed_levels}\n")
    return code


def cmd_qi_audit(args) -> int:
    if not args.compare:
        raise ConfigError("qi-audit needs --compare FAMILY for the domain H (the codomain G is --family)")
    g_eng = _engine(args)
    h_eng = engine_from_name(args.compare)
    kind = _auto_kind(h_eng, g_eng) if args.qi in (None, "auto") else args.qi
    if kind not in QI_KINDS:
        raise ConfigError(f"unknown QI kind {kind!r}")
    radius = args.radius if args.radius is not None else 4
    br = 2 * radius + 2
    G = build_ball(g_eng, br, budget_states=args.max_ball, allow_heuristic=args.allow_heuristic)
    H = build_ball(h_eng, br, budget_states=args.max_ball)
    params = {"index": args.index} if kind == "finite_index" else {}
    q = builtin_qi(kind, H, G, radius, **params)
    aud = audit(q, n_pairs=args.pairs, radius=radius, seed=args.seed)
    out = {"schema": "scirate.qi/1", "map": q.descriptor(), "audit": aud}
    text = _dump(out)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if aud["passed"] else EXIT_INTERNAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scirate", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"scirate {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", default="z2", help="built-in group family (z<n>, z<n>-altgens, free<n>, cyclic<n>, heisenberg, sol, surface<g>, <family>xz2)")
    common.add_argument("--presentation", help="presentation file (gens:/rel: format); completed by Knuth-Bendix")
    common.add_argument("--radius", type=int, default=None)
    common.add_argument("--d", type=int, default=None, help="Rips parameter (default: smallest d with 2d > longest relator)")
    common.add_argument("--m", type=int, default=1, help="number of colors")
    common.add_argument("--budget-states", type=int, default=10**6)
    common.add_argument("--max-ball", type=int, default=10**6, help="abort if the ball exceeds this many elements")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--cache", help="ball cache file (read if valid, else written)")
    common.add_argument("--allow-heuristic", action="store_true")
    common.add_argument("--kb-rules", type=int, default=5000)
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("ball", parents=[common], help="build a ball and print cumulative sizes")
    s.set_defaults(func=cmd_ball, radius_default=3)
    s = sub.add_parser("rips", parents=[common], help="Rips 2-skeleton counts (and free-action check when colored)")
    s.set_defaults(func=cmd_rips, radius_default=4)
    s = sub.add_parser("certify-sci", parents=[common], help="fill relator loops and random loops in P_d")
    s.add_argument("--loops", type=int, default=200, help="number of random loops")
    s.add_argument("--max-length", type=int, default=12)
    s.add_argument("--region", type=int, default=None, help="radius loops are drawn from")
    s.set_defaults(func=cmd_certify, radius_default=8)
    s = sub.add_parser("fill-loop", parents=[common], help="fill one loop given as comma-separated words")
    s.add_argument("--loop", required=True)
    s.add_argument("--inner", type=int, default=None)
    s.add_argument("--outer", type=int, default=None)
    s.set_defaults(func=cmd_fill, radius_default=6)
    s = sub.add_parser("vrate", parents=[common], help="bracket the vanishing rate V(r)")
    s.add_argument("--rmin", type=int, default=2)
    s.add_argument("--rmax", type=int, default=4)
    s.add_argument("--loop-radius", type=int, default=None)
    s.add_argument("--max-generators", type=int, default=100)
    s.add_argument("--random-loops", type=int, default=20)
    s.add_argument("--compare", help="second family for the equivalence comparison")
    s.add_argument("--qi", nargs="?", const="auto", default=None, help="also check the quasi-isometry prediction (optional kind)")
    s.add_argument("--fit-radius", type=int, default=4)
    s.add_argument("--pairs", type=int, default=10_000)
    s.set_defaults(func=cmd_vrate, radius_default=None)
    s = sub.add_parser("qi-audit", parents=[common], help="fit and audit a built-in quasi-isometry H -> G")
    s.add_argument("--compare", help="domain family H")
    s.add_argument("--qi", default=None, help=f"map kind: {', '.join(QI_KINDS)} (default: inferred)")
    s.add_argument("--index", type=int, default=2)
    s.add_argument("--pairs", type=int, default=10_000)
    s.set_defaults(func=cmd_qi_audit, radius_default=None)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if args.radius is None and args.radius_default is not None:
        args.radius = args.radius_default
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.m < 1:
            raise ConfigError("--m must be >= 1")
        if args.d is not None and args.d < 1:
            raise ConfigError("--d must be >= 1")
        return args.func(args)
    except (ReplayError, CertificateError, ConsistencyError, TransportError) as exc:
        sys.stderr.write(f"internal consistency violation: {exc}\n")
        return EXIT_INTERNAL
    except (ConfigError, PreconditionError, MarginError, BudgetExceeded, HeuristicEngineError,
            PresentationSyntaxError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
