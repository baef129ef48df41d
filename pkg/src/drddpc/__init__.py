"""Distributionally robust data-driven predictive control toolkit.

Modules:
    model: innovation-form LTI plants, noise laws and seeded simulation.
    data: offline excitation experiments and Hankel partitions.
    predictor: least-squares multi-step predictor and residual scenarios.
    ambiguity: Wasserstein radii plus transport and CVaR oracles.
    ocp: receding-horizon program builders for every controller kind.
    solver: dense primal-dual interior-point QP solver.
    controllers: closed-loop simulation of SPC, Reg-DeePC and the robust controller.
    bench: Monte-Carlo campaigns, sweeps and report files.
    cli: command-line entry point ``drddpc``.
"""

__version__ = "0.1.0"
