"""Topic model fitted by batch variational EM with symmetric Dirichlet priors.

The document-topic posteriors (gamma) are optimized to convergence inside
each E step, so the evidence lower bound is non-decreasing across EM
iterations up to floating-point slack. Inference returns per-document topic
proportions (rows sum to 1); documents with no in-vocabulary tokens get a
uniform row.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln, psi

logger = logging.getLogger(__name__)

_GAMMA_TOL = 1e-6
_MAX_GAMMA_ITER = 200


def _dirichlet_expectation(alpha: np.ndarray) -> np.ndarray:
    if alpha.ndim == 1:
        return psi(alpha) - psi(alpha.sum())
    return psi(alpha) - psi(alpha.sum(axis=1))[:, np.newaxis]


def _doc_arrays(X) -> list[tuple[np.ndarray, np.ndarray]]:
    X = sp.csr_matrix(X)
    docs = []
    for d in range(X.shape[0]):
        start, end = X.indptr[d], X.indptr[d + 1]
        docs.append((X.indices[start:end], X.data[start:end].astype(np.float64)))
    return docs


class LdaModel:
    """Fitted topic-word distributions plus the variational parameters needed
    to infer topic proportions for new documents."""

    def __init__(self, lam: np.ndarray, alpha: float, eta: float, max_iter: int,
                 elbo_history: list[float]):
        self._lambda = lam
        self.alpha = alpha
        self.eta = eta
        self.max_iter = max_iter
        self.elbo_history = elbo_history
        self.topic_word = lam / lam.sum(axis=1, keepdims=True)
        self._Elogbeta = _dirichlet_expectation(lam)
        self._expElogbeta = np.exp(self._Elogbeta)

    @property
    def n_topics(self) -> int:
        return self._lambda.shape[0]

    @property
    def n_features(self) -> int:
        return self._lambda.shape[1]

    def infer(self, X) -> np.ndarray:
        """Per-document topic proportions; each row sums to 1."""
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"feature dimension {X.shape[1]} does not match fitted {self.n_features}"
            )
        gamma, _ = self._e_step(_doc_arrays(X))
        empty = np.asarray(X.sum(axis=1)).ravel() == 0
        theta = gamma / gamma.sum(axis=1, keepdims=True)
        if empty.any():
            logger.warning("%d all-zero document(s); returning uniform topic mix", empty.sum())
            theta[empty] = 1.0 / self.n_topics
        return theta

    def _e_step(self, docs) -> tuple[np.ndarray, np.ndarray]:
        """Optimize gamma per document; returns (gamma, sufficient statistics)."""
        k = self.n_topics
        gamma = np.empty((len(docs), k))
        sstats = np.zeros_like(self._lambda)
        for d, (ids, cts) in enumerate(docs):
            if ids.size == 0:
                gamma[d] = self.alpha + 0.0
                continue
            gamma_d = np.full(k, self.alpha + cts.sum() / k)
            expElogbeta_d = self._expElogbeta[:, ids]
            for _ in range(_MAX_GAMMA_ITER):
                last = gamma_d
                expElogtheta_d = np.exp(_dirichlet_expectation(gamma_d))
                phinorm = expElogtheta_d @ expElogbeta_d + 1e-100
                gamma_d = self.alpha + expElogtheta_d * (expElogbeta_d @ (cts / phinorm))
                if np.mean(np.abs(gamma_d - last)) < _GAMMA_TOL:
                    break
            gamma[d] = gamma_d
            expElogtheta_d = np.exp(_dirichlet_expectation(gamma_d))
            phinorm = expElogtheta_d @ expElogbeta_d + 1e-100
            sstats[:, ids] += np.outer(expElogtheta_d, cts / phinorm)
        sstats *= self._expElogbeta
        return gamma, sstats

    def _elbo(self, docs, gamma: np.ndarray) -> float:
        """Evidence lower bound of the corpus under the current parameters."""
        alpha, eta = self.alpha, self.eta
        k, v = self._lambda.shape
        Elogtheta = _dirichlet_expectation(gamma)
        score = 0.0
        for d, (ids, cts) in enumerate(docs):
            if ids.size == 0:
                continue
            # E[log p(w | theta, beta)] via the per-word mixture bound
            lognorm = np.log(np.exp(Elogtheta[d])[np.newaxis, :] @ self._expElogbeta[:, ids] + 1e-100)
            score += float(cts @ lognorm.ravel())
        # E[log p(theta | alpha) - log q(theta | gamma)]
        score += float(np.sum((alpha - gamma) * Elogtheta))
        score += float(np.sum(gammaln(gamma) - gammaln(alpha)))
        score += float(np.sum(gammaln(alpha * k) - gammaln(gamma.sum(axis=1))))
        # E[log p(beta | eta) - log q(beta | lambda)]
        score += float(np.sum((eta - self._lambda) * self._Elogbeta))
        score += float(np.sum(gammaln(self._lambda) - gammaln(eta)))
        score += float(np.sum(gammaln(eta * v) - gammaln(self._lambda.sum(axis=1))))
        return score


def fit_lda(
    X,
    n_topics: int,
    max_iter: int = 50,
    alpha: float | None = None,
    beta: float = 0.01,
    seed: int = 0,
) -> LdaModel:
    """Batch variational EM over a non-negative count matrix.

    ``alpha`` defaults to the symmetric 1/n_topics prior; ``beta`` is the
    topic-word prior (eta). Deterministic for a fixed seed.
    """
    if n_topics < 2:
        raise ValueError("n_topics must be >= 2")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    data = X.data if sp.issparse(X) else np.asarray(X)
    if (np.asarray(data) < 0).any():
        raise ValueError("counts must be non-negative")
    if alpha is None:
        alpha = 1.0 / n_topics

    n_features = X.shape[1]
    rng = np.random.default_rng(seed)
    lam = rng.gamma(100.0, 1.0 / 100.0, (n_topics, n_features))
    model = LdaModel(lam, alpha=alpha, eta=beta, max_iter=max_iter, elbo_history=[])

    docs = _doc_arrays(X)
    empty = sum(1 for ids, _ in docs if ids.size == 0)
    if empty:
        logger.warning("%d all-zero document(s) in the fitting corpus", empty)
    for _ in range(max_iter):
        gamma, sstats = model._e_step(docs)
        lam = beta + sstats
        model = LdaModel(lam, alpha=alpha, eta=beta, max_iter=max_iter,
                         elbo_history=model.elbo_history)
        model.elbo_history.append(model._elbo(docs, gamma))
    return model
