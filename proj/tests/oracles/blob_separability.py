"""Separability of the four session-1 blobs (ring radius 3, 7 classes).

Run: python3 tests/oracles/blob_separability.py  (needs numpy, scikit-learn)
Prints the logistic-regression training accuracy over 20 seeds and the
Bayes-optimal accuracy for blob std = 0.35 x chord between neighbouring centres.
The numbers back the learnability bounds in tests/test_model.cpp.
"""
import numpy as np
from sklearn.linear_model import LogisticRegression

K = 7
R = 3.0
ang = 2 * np.pi * np.arange(K) / K
C = np.c_[R * np.cos(ang), R * np.sin(ang)]
sd = 0.35 * 2 * R * np.sin(np.pi / K)

accs = []
for seed in range(20):
    rng = np.random.default_rng(seed)
    X = np.vstack([C[k] + sd * rng.standard_normal((200, 2)) for k in range(4)])
    y = np.repeat(np.arange(4), 200)
    accs.append(LogisticRegression(C=100, max_iter=2000).fit(X, y).score(X, y))

# population Bayes rule: nearest centre among the four
rng = np.random.default_rng(99)
X = np.vstack([C[k] + sd * rng.standard_normal((50000, 2)) for k in range(4)])
y = np.repeat(np.arange(4), 50000)
d = ((X[:, None, :] - C[None, :4, :]) ** 2).sum(-1)
print(f"std {sd:.6f}  logreg min {min(accs):.4f} mean {np.mean(accs):.4f}  bayes {np.mean(d.argmin(1) == y):.4f}")
