"""MCMC over predictor inclusion, covariate inclusion, kernel parameters and the graph.

One iteration runs, in order: a graph sweep, one between-model move
(Add / Delete / Keep), a within-model move for every included predictor, a
joint draw of the coefficient curves and a conjugate update of the noise
variance. Predictor and covariate moves use the marginal likelihood with the
curves integrated out.
"""

from __future__ import annotations

import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import GraphScatter, graph_sweep
from .kernel import (
    build_kernel,
    log_mvn_zero_mean,
    pairwise_sq_diffs,
    sample_beta_joint,
)
from .model import (
    RHO_FLOOR,
    ChainState,
    KernelParams,
    NumericalFault,
    Trace,
    TraceRecord,
    ValidationError,
)

log = logging.getLogger(__name__)

MOVE_KINDS = ("add", "delete", "keep", "covariate", "rho", "scale")
MOVE_WEIGHTS = {"add": 0.4, "delete": 0.4, "keep": 0.2}
WORKERS_ENV = "VERGE_WORKERS"


@dataclass
class RunConfig:
    total_iterations: int = 60_000
    burn_in: int = 30_000
    thin: int = 5
    seed: int = 0
    chains: int = 1
    rho_step: float = 0.5
    scale_step: float = 0.3
    progress_every: int = 1000
    dump_dir: str | None = None

    def __post_init__(self):
        for name in ("total_iterations", "thin", "chains"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be a positive integer")
        if not 0 <= self.burn_in < self.total_iterations:
            raise ValidationError("burn_in must be non-negative and smaller than total_iterations")
        if self.rho_step <= 0 or self.scale_step <= 0:
            raise ValidationError("proposal step sizes must be positive")


@dataclass
class MoveStats:
    proposed: dict = field(default_factory=lambda: dict.fromkeys(MOVE_KINDS, 0))
    accepted: dict = field(default_factory=lambda: dict.fromkeys(MOVE_KINDS, 0))

    def record(self, kind, accepted):
        self.proposed[kind] += 1
        self.accepted[kind] += bool(accepted)

    def merge(self, other: "MoveStats"):
        for k in MOVE_KINDS:
            self.proposed[k] += other.proposed[k]
            self.accepted[k] += other.accepted[k]
        return self

    def rates(self):
        return {k: (self.accepted[k] / self.proposed[k] if self.proposed[k] else None)
                for k in MOVE_KINDS}

    def to_dict(self):
        return {"proposed": dict(self.proposed), "accepted": dict(self.accepted),
                "rates": self.rates()}


def mrf_log_prior_ratio_flip(gamma, adj, j, hyper):
    """log p(gamma_j = 1 | rest) - log p(gamma_j = 0 | rest) under the MRF prior."""
    adj = np.asarray(adj, dtype=bool)
    neighbors = adj[j].copy()
    neighbors[j] = False
    return hyper.a_mrf + hyper.b_mrf * float(np.asarray(gamma)[neighbors].sum())


def draw_kernel_params(K, hyper, rng) -> KernelParams:
    """Draw one predictor's kernel parameters from their prior."""
    gt = (rng.random(K) < hyper.alpha_cov).astype(np.int8)
    rho = np.where(gt == 1, rng.uniform(RHO_FLOOR, 1.0, size=K), 1.0)
    return KernelParams(
        gamma_tilde=gt,
        rho=rho,
        lambda_a=rng.gamma(hyper.a_lambda, 1.0 / hyper.b_lambda),
        lambda_z=rng.gamma(hyper.a_z, 1.0 / hyper.b_z),
        r=rng.gamma(hyper.a_r, 1.0 / hyper.b_r),
    )


def move_probabilities(m, P):
    """Probabilities of Add / Delete / Keep when ``m`` of ``P`` predictors are included."""
    w = {"add": MOVE_WEIGHTS["add"] if m < P else 0.0,
         "delete": MOVE_WEIGHTS["delete"] if m > 0 else 0.0,
         "keep": MOVE_WEIGHTS["keep"] if m > 0 else 0.0}
    total = sum(w.values())
    return {k: v / total for k, v in w.items()}


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _gamma_log_ratio(new, old, shape, rate):
    # prior ratio times the Jacobian of a log-scale walk
    return shape * (np.log(new) - np.log(old)) - rate * (new - old)


class ChainRunner:
    """Mutable sampler for one chain.

    Keeps the ``D_j K_j D_j`` contribution of each included predictor and the
    current log marginal likelihood so proposals only rebuild the kernel that
    changes. ``flat_likelihood=True`` replaces the regression likelihood by a
    constant and gives the graph layer an empty scatter matrix, which leaves
    the sampler targeting the prior.
    """

    def __init__(self, data, hyper, config, rng, state=None, flat_likelihood=False):
        self.data = data
        self.hyper = hyper
        self.config = config
        self.rng = rng
        self.flat_likelihood = flat_likelihood
        if flat_likelihood:
            self.scatter = GraphScatter(np.zeros((data.P, data.P)), 0)
        else:
            self.scatter = GraphScatter.from_data(data.X)
        self._sqdiff = pairwise_sq_diffs(data.Z, data.Z)
        self._xx = {}
        if state is None:
            tau2 = float(np.var(data.y)) if np.var(data.y) > 0 else 1.0
            state = ChainState.initial(data.P, data.K, data.n, tau2=tau2)
        self.state = state
        self.stats = MoveStats()
        self._contrib = {j: self._contribution(j, state.kernel_params(j)) for j in state.included}
        self.loglik = self._loglik(self._contrib)

    def _contribution(self, j, params):
        if j not in self._xx:
            self._xx[j] = np.outer(self.data.X[:, j], self.data.X[:, j])
        K = build_kernel(self.data.Z, params, sqdiff=self._sqdiff)
        K *= self._xx[j]
        return K

    def _sigma(self, contrib):
        n = self.data.n
        Sigma = np.zeros((n, n))
        for j in sorted(contrib):
            Sigma += contrib[j]
        Sigma.flat[::n + 1] += self.state.tau2
        return Sigma

    def _loglik(self, contrib):
        if self.flat_likelihood:
            return 0.0
        return log_mvn_zero_mean(self.data.y, self._sigma(contrib))

    def _accept(self, log_ratio):
        return np.log(self.rng.random()) < log_ratio

    def _propose_params(self, j, params, kind, extra_log_ratio):
        contrib = dict(self._contrib)
        contrib[j] = self._contribution(j, params)
        ll = self._loglik(contrib)
        ok = self._accept(ll - self.loglik + extra_log_ratio)
        if ok:
            self._contrib = contrib
            self.loglik = ll
            self.state.set_kernel_params(j, params)
        self.stats.record(kind, ok)
        return ok

    # between-model moves

    def between_model_move(self):
        st, hyper, rng = self.state, self.hyper, self.rng
        P = st.P
        m = int(st.gamma.sum())
        probs = move_probabilities(m, P)
        kinds = list(probs)
        kind = kinds[rng.choice(len(kinds), p=[probs[k] for k in kinds])]

        if kind == "add":
            j = int(rng.choice(np.flatnonzero(st.gamma == 0)))
            params = draw_kernel_params(self.data.K, hyper, rng)
            contrib = dict(self._contrib)
            contrib[j] = self._contribution(j, params)
            ll = self._loglik(contrib)
            reverse = move_probabilities(m + 1, P)["delete"] / (m + 1)
            forward = probs["add"] / (P - m)
            log_ratio = (ll - self.loglik + mrf_log_prior_ratio_flip(st.gamma, st.adj, j, hyper)
                         + np.log(reverse) - np.log(forward))
            ok = self._accept(log_ratio)
            if ok:
                st.gamma[j] = 1
                st.set_kernel_params(j, params)
                self._contrib, self.loglik = contrib, ll
        elif kind == "delete":
            j = int(rng.choice(st.included))
            contrib = {l: c for l, c in self._contrib.items() if l != j}
            ll = self._loglik(contrib)
            reverse = move_probabilities(m - 1, P)["add"] / (P - m + 1)
            forward = probs["delete"] / m
            log_ratio = (ll - self.loglik - mrf_log_prior_ratio_flip(st.gamma, st.adj, j, hyper)
                         + np.log(reverse) - np.log(forward))
            ok = self._accept(log_ratio)
            if ok:
                st.reset_predictor(j)
                self._contrib, self.loglik = contrib, ll
        else:
            j = int(rng.choice(st.included))
            params = draw_kernel_params(self.data.K, hyper, rng)
            contrib = dict(self._contrib)
            contrib[j] = self._contribution(j, params)
            ll = self._loglik(contrib)
            ok = self._accept(ll - self.loglik)
            if ok:
                st.set_kernel_params(j, params)
                self._contrib, self.loglik = contrib, ll
        self.stats.record(kind, ok)
        return kind, ok

    # within-model moves

    def within_model_move(self, j):
        st, hyper, rng, cfg = self.state, self.hyper, self.rng, self.config
        if not st.gamma[j]:
            raise ValidationError(f"predictor {j} is not included")

        # covariate flip; switching on draws rho from its prior so the densities cancel
        cur = st.kernel_params(j)
        k = int(rng.integers(self.data.K))
        gt, rho = cur.gamma_tilde.copy(), cur.rho.copy()
        log_prior_odds = np.log(hyper.alpha_cov) - np.log1p(-hyper.alpha_cov)
        if gt[k]:
            gt[k], rho[k] = 0, 1.0
            extra = -log_prior_odds
        else:
            gt[k], rho[k] = 1, rng.uniform(RHO_FLOOR, 1.0)
            extra = log_prior_odds
        self._propose_params(j, KernelParams(gt, rho, cur.lambda_a, cur.lambda_z, cur.r),
                             "covariate", extra)

        # logit-scale walk on the active rho values; proposals below the floor are rejected
        cur = st.kernel_params(j)
        active = np.flatnonzero(cur.gamma_tilde)
        if active.size:
            rho = cur.rho.copy()
            x = _logit(rho[active]) + cfg.rho_step * rng.standard_normal(active.size)
            new = 1.0 / (1.0 + np.exp(-x))
            if np.all(new >= RHO_FLOOR) and np.all(new < 1.0):
                old = rho[active]
                jac = np.sum(np.log(new) + np.log1p(-new) - np.log(old) - np.log1p(-old))
                rho[active] = new
                self._propose_params(
                    j, KernelParams(cur.gamma_tilde.copy(), rho, cur.lambda_a, cur.lambda_z, cur.r),
                    "rho", jac)
            else:
                self.stats.record("rho", False)

        # log-scale walk on the kernel scales and the jitter precision
        cur = st.kernel_params(j)
        la, lz, r = np.array([cur.lambda_a, cur.lambda_z, cur.r]) * np.exp(
            cfg.scale_step * rng.standard_normal(3))
        extra = (_gamma_log_ratio(la, cur.lambda_a, hyper.a_lambda, hyper.b_lambda)
                 + _gamma_log_ratio(lz, cur.lambda_z, hyper.a_z, hyper.b_z)
                 + _gamma_log_ratio(r, cur.r, hyper.a_r, hyper.b_r))
        self._propose_params(j, KernelParams(cur.gamma_tilde.copy(), cur.rho.copy(), la, lz, r),
                             "scale", extra)

    # conditional draws

    def update_beta(self):
        st = self.state
        if st.included.size == 0:
            st.beta[:] = 0.0
            return
        st.beta = sample_beta_joint(self.data, st, self.rng, Sigma=self._sigma(self._contrib))

    def update_tau2(self):
        update_tau2(self.data, self.state, self.hyper, self.rng)
        self.loglik = self._loglik(self._contrib)

    def step(self):
        graph_sweep(self.scatter, self.state, self.hyper, self.rng)
        self.between_model_move()
        for j in self.state.included:
            self.within_model_move(int(j))
        self.update_beta()
        self.update_tau2()


def fitted_values(data, state):
    inc = state.included
    return (data.X[:, inc] * state.beta[inc].T).sum(axis=1)


def update_tau2(data, state, hyper, rng):
    """Conjugate inverse-gamma draw of the noise variance given the current curves."""
    resid = data.y - fitted_values(data, state)
    shape = hyper.a0 + data.n / 2.0
    rate = hyper.b0 + 0.5 * float(resid @ resid)
    state.tau2 = 1.0 / rng.gamma(shape, 1.0 / rate)
    return state


def between_model_move(data, state, hyper, config, rng, flat_likelihood=False):
    """Run one Add / Delete / Keep proposal on ``state`` and return it with the move counts."""
    runner = ChainRunner(data, hyper, config, rng, state=state, flat_likelihood=flat_likelihood)
    runner.between_model_move()
    return runner.state, runner.stats


def within_model_covariate_move(data, state, hyper, config, rng, j, flat_likelihood=False):
    runner = ChainRunner(data, hyper, config, rng, state=state, flat_likelihood=flat_likelihood)
    runner.within_model_move(j)
    return runner.state, runner.stats


def _dump_state(state, config, chain, iteration):
    directory = config.dump_dir or tempfile.gettempdir()
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"verge_fault_chain{chain}_iter{iteration}.npz")
    try:
        np.savez(path, **{k: np.asarray(v) for k, v in vars(state).items()})
    except OSError:
        return None
    return path


def run_chain(data, hyper, config, chain=0, flat_likelihood=False, state=None):
    """Run one chain and return its thinned post-burn-in trace and move counts.

    The chain is seeded with ``config.seed + chain``, so identical arguments
    reproduce the trace exactly.
    """
    seed = int(config.seed) + int(chain)
    rng = np.random.default_rng(seed)
    runner = ChainRunner(data, hyper, config, rng, state=state, flat_likelihood=flat_likelihood)
    trace = Trace(meta={
        "seed": seed,
        "chain": int(chain),
        "total_iterations": int(config.total_iterations),
        "burn_in": int(config.burn_in),
        "thin": int(config.thin),
        "n": data.n, "P": data.P, "K": data.K,
        "hyperparameters": hyper.to_dict(),
        "standardizer": data.standardizer.to_dict(),
    })
    for it in range(config.total_iterations):
        try:
            runner.step()
        except NumericalFault as exc:
            path = _dump_state(runner.state, config, chain, it)
            raise NumericalFault(f"numerical fault at iteration {it}: {exc}; state dumped to {path}",
                                 iteration=it, dump_path=path) from exc
        done = it + 1
        if done > config.burn_in and (done - config.burn_in) % config.thin == 0:
            trace.records.append(TraceRecord.from_state(runner.state))
        if config.progress_every and done % config.progress_every == 0:
            rates = runner.stats.rates()
            log.info("chain %d iter %d included %d edges %d acc add=%s delete=%s keep=%s cov=%s",
                     chain, done, int(runner.state.gamma.sum()),
                     int(np.triu(runner.state.adj, 1).sum()),
                     *(f"{rates[k]:.2f}" if rates[k] is not None else "na"
                       for k in ("add", "delete", "keep", "covariate")))
    return trace, runner.stats


def _run_chain_job(args):
    return run_chain(*args)


def worker_count(default=1):
    value = os.environ.get(WORKERS_ENV)
    if not value:
        return default
    try:
        return max(1, int(value))
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be an integer") from None


def run_chains(data, hyper, config, workers=None):
    """Run ``config.chains`` independent chains, in parallel when ``workers > 1``."""
    workers = worker_count() if workers is None else workers
    jobs = [(data, hyper, config, c) for c in range(config.chains)]
    if workers > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=min(workers, config.chains)) as pool:
            return list(pool.map(_run_chain_job, jobs))
    return [_run_chain_job(job) for job in jobs]


def config_from_dict(d):
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ValidationError(f"unknown run setting(s): {', '.join(sorted(unknown))}")
    return RunConfig(**d)


def config_to_dict(config):
    return asdict(config)
