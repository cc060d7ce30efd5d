import numpy as np
import pytest
import scipy.sparse as sp
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from fvclust.clustering import Partition, nmi
from fvclust.estimator import NormalizedCutClustering, SparseCommunityDetection
from fvclust.graphs import PlantedPartitionSpec, block_affinity, generate_planted


def test_community_estimator_fit_predict():
    g, truth = generate_planted(PlantedPartitionSpec(90, 3, 0.05, 12, seed=5))
    est = SparseCommunityDetection(n_clusters=3, random_state=1)
    labels = est.fit_predict(g.adjacency())
    assert nmi(Partition(labels), truth) == 1.0
    assert est.embedding_.shape == (90, 3) and est.n_iter_ >= 1
    # dense input gives the same answer
    assert np.array_equal(SparseCommunityDetection(3, random_state=1)
                          .fit_predict(g.adjacency().toarray()), labels)


def test_params_and_clone():
    est = SparseCommunityDetection(n_clusters=4, lambda1=0.5, mode="exact")
    c = clone(est)
    assert c.get_params() == est.get_params()
    c.set_params(lambda1=0.1)
    assert est.lambda1 == 0.5
    n = NormalizedCutClustering(n_clusters=3, lambdas=(0.1,))
    assert clone(n).get_params()["lambdas"] == (0.1,)


@pytest.mark.parametrize("X", [
    np.ones((3, 4)),
    np.array([[0.0, -1.0], [-1.0, 0.0]]),
    np.array([[0.0, 1.0], [2.0, 0.0]]),
    np.array([[0.0, np.nan], [np.nan, 0.0]]),
    np.zeros((1, 1)),
])
def test_validation_errors(X):
    with pytest.raises(ValueError):
        SparseCommunityDetection(2).fit(X)
    with pytest.raises(ValueError):
        NormalizedCutClustering(2).fit(sp.csr_matrix(X) if X.shape[0] == X.shape[1] else X)


def test_ncut_estimator_precomputed_and_image():
    W, labels = block_affinity([5, 7, 6], seed=2)
    est = NormalizedCutClustering(n_clusters=3)
    assert nmi(Partition(est.fit_predict(W)), Partition(labels)) == 1.0
    assert est.association() == pytest.approx(3.0)

    img = np.zeros((6, 6))
    img[:, 3:] = 0.9
    est = NormalizedCutClustering(n_clusters=2, affinity="image", radius=2)
    out = est.fit_predict(img)
    assert nmi(Partition(out), Partition((np.arange(36) % 6 >= 3).astype(int))) == 1.0
    assert est.affinity_matrix_.shape == (36, 36)


def test_ncut_estimator_errors():
    with pytest.raises(ValueError):
        NormalizedCutClustering(2, affinity="rbf").fit(np.eye(3))
    with pytest.raises(NotFittedError):
        NormalizedCutClustering(2).association()
