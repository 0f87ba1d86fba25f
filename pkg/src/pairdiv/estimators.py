"""scikit-learn style wrappers.

The functional API does the work; these classes hold parameters, validate
them in ``fit`` and expose fitted results as trailing-underscore
attributes so they compose with ``get_params``/``set_params`` and
``sklearn.base.clone``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    check_choice, check_fraction, check_int, check_nonempty, check_records, check_tally_or_records,
)
from .aggregation import FUNCTIONS, bootstrap, get_scorer, rank_from_scores
from .audit import pairwise_efficiency, pairwise_matrix, svd_factors
from .curation import CurationConfig, curate, detect_suspicious
from .divisiveness import aggregate_divisiveness, pairwise_divisiveness, split_divisiveness, split_scores
from .pairwise import PairwiseTally, build_tally


class PairwiseAggregator(BaseEstimator):
    """Score proposals from pairwise records with one aggregation function.

    Parameters
    ----------
    function : {"win", "copeland", "elo", "ahp"}
    bootstrap_iters : int
        0 scores the full data once; otherwise subsample-and-average.
    bootstrap_fraction : float
    seed : int
    """

    def __init__(self, function="win", bootstrap_iters=0, bootstrap_fraction=0.5, seed=0):
        self.function = function
        self.bootstrap_iters = bootstrap_iters
        self.bootstrap_fraction = bootstrap_fraction
        self.seed = seed

    def _scorer(self):
        check_choice(self.function, "function", FUNCTIONS)
        params = {"seed": self.seed} if self.function == "elo" else {}
        return get_scorer(self.function, **params)

    def fit(self, X, y=None):
        records = check_nonempty(check_records(X))
        iters = check_int(self.bootstrap_iters, "bootstrap_iters")
        frac = check_fraction(self.bootstrap_fraction, "bootstrap_fraction")
        scorer = self._scorer()
        if iters:
            self.scores_ = bootstrap(scorer, records, iters, frac, self.seed)
        else:
            self.scores_ = scorer(records)
        self.ranking_ = rank_from_scores(self.scores_)
        self.proposal_ids_ = records.proposal_ids
        self.n_features_in_ = len(records.proposal_ids)
        return self

    def predict(self, pairs):
        """Predicted winner id for each (a, b) row of proposal ids."""
        check_is_fitted(self, "scores_")
        pairs = np.atleast_2d(np.asarray(pairs, dtype=np.int64))
        if pairs.shape[1] != 2:
            raise ValueError("pairs must have two columns")
        lut = {int(p): k for k, p in enumerate(self.proposal_ids_)}
        pos = self.ranking_.position
        try:
            better_a = np.array([pos[a] <= pos[b] for a, b in pairs.tolist()])
            _ = [lut[p] for p in pairs.ravel().tolist()]
        except KeyError as exc:
            raise ValueError(f"unknown proposal id {exc.args[0]}") from None
        return np.where(better_a, pairs[:, 0], pairs[:, 1])

    def score(self, X, y=None):
        """Share of decided records whose winner is the higher-ranked proposal."""
        check_is_fitted(self, "scores_")
        rec = check_records(X).decided()
        if not len(rec):
            raise ValueError("no decided records to score")
        pid = rec.proposal_ids
        pred = self.predict(np.column_stack([pid[rec.low], pid[rec.high]]))
        return float(np.mean(pred == pid[rec.winner]))


class PairwiseDivisiveness(BaseEstimator):
    """Demographic-free divisiveness of every proposal."""

    def __init__(self, function="win", membership="majority", denominator="valid",
                 bootstrap_iters=0, bootstrap_fraction=0.5, seed=0):
        self.function = function
        self.membership = membership
        self.denominator = denominator
        self.bootstrap_iters = bootstrap_iters
        self.bootstrap_fraction = bootstrap_fraction
        self.seed = seed

    def fit(self, X, y=None):
        records = check_nonempty(check_records(X))
        check_choice(self.function, "function", FUNCTIONS)
        check_choice(self.membership, "membership", ("majority", "record"))
        check_choice(self.denominator, "denominator", ("valid", "all"))
        self.table_ = pairwise_divisiveness(
            records, self.function, membership=self.membership, denominator=self.denominator,
            bootstrap_iters=check_int(self.bootstrap_iters, "bootstrap_iters"),
            bootstrap_fraction=check_fraction(self.bootstrap_fraction, "bootstrap_fraction"),
            seed=self.seed,
        )
        self.ranking_ = rank_from_scores(self.table_)
        self.n_features_in_ = len(records.proposal_ids)
        return self


class SplitDivisiveness(BaseEstimator):
    """Score gap between the two groups of a demographic split.

    ``fit`` needs the participant profiles, passed as ``profiles=``.
    """

    def __init__(self, split=None, function="win"):
        self.split = split
        self.function = function

    def fit(self, X, y=None, *, profiles=None):
        if self.split is None:
            raise ValueError("split must be set")
        if profiles is None:
            raise ValueError("profiles are required")
        records = check_nonempty(check_records(X))
        check_choice(self.function, "function", FUNCTIONS)
        self.table_ = split_divisiveness(records, profiles, self.split, self.function)
        a, b = split_scores(records, profiles, self.split, self.function)
        self.scores_a_, self.scores_b_ = a, b
        self.aggregate_ = aggregate_divisiveness(a, b)
        return self


class PairwiseSVD(TransformerMixin, BaseEstimator):
    """SVD of the win-rate matrix; ``transform`` returns the leading left vectors."""

    def __init__(self, n_factors=3, impute=0.5):
        self.n_factors = n_factors
        self.impute = impute

    def fit(self, X, y=None):
        data = check_tally_or_records(X)
        tally = data if isinstance(data, PairwiseTally) else build_tally(data)
        check_fraction(self.impute, "impute", closed_low=True)
        self.matrix_ = pairwise_matrix(tally, self.impute)
        self.report_ = svd_factors(self.matrix_, check_int(self.n_factors, "n_factors", 1))
        self.components_ = self.report_.u[:, : self.n_factors].T
        self.explained_variance_ratio_ = self.report_.variance_share[: self.n_factors]
        return self

    def transform(self, X=None):
        check_is_fitted(self, "report_")
        return self.components_.T.copy()

    def efficiency(self, ranking) -> float:
        check_is_fitted(self, "report_")
        return pairwise_efficiency(self.matrix_, ranking)


class SuspiciousUserDetector(TransformerMixin, BaseEstimator):
    """Flag suspicious accounts on a corpus, then curate pairwise records."""

    def __init__(self, accepted_universes=(2, 4, 5, 6), recaptcha_threshold=0.7,
                 static_rank_max_update_rate=0.10, static_rank_min_panels=3, max_approvals=None,
                 dedupe=True):
        self.accepted_universes = accepted_universes
        self.recaptcha_threshold = recaptcha_threshold
        self.static_rank_max_update_rate = static_rank_max_update_rate
        self.static_rank_min_panels = static_rank_min_panels
        self.max_approvals = max_approvals
        self.dedupe = dedupe

    def fit(self, corpus, y=None, *, consent_ids=None, ip_scores=None, user_ip=None):
        config = CurationConfig(
            accepted_universes=frozenset(self.accepted_universes),
            recaptcha_threshold=self.recaptcha_threshold,
            static_rank_max_update_rate=self.static_rank_max_update_rate,
            static_rank_min_panels=self.static_rank_min_panels,
            max_approvals=self.max_approvals, consent_ids=consent_ids,
            ip_scores=ip_scores, user_ip=user_ip,
        )
        self.report_ = detect_suspicious(corpus, config)
        self.flagged_ = self.report_.flagged_users
        return self

    def transform(self, X):
        check_is_fitted(self, "report_")
        return curate(check_records(X), self.report_, dedupe=self.dedupe)
