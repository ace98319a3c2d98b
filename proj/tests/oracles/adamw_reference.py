"""AdamW (Adam step, then decoupled decay on the updated value), three steps."""
import math

lr, wd, b1, b2, eps = 0.01, 0.1, 0.9, 0.999, 1e-8
p = [0.5, -1.0, 2.0]
grads = [[0.1, -0.2, 0.0], [0.3, 0.1, -0.5], [-0.2, 0.0, 1.0]]
m = [0.0] * 3
v = [0.0] * 3
for t, g in enumerate(grads, start=1):
    for i in range(3):
        m[i] = b1 * m[i] + (1 - b1) * g[i]
        v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i]
        mh = m[i] / (1 - b1 ** t)
        vh = v[i] / (1 - b2 ** t)
        p[i] -= lr * mh / (math.sqrt(vh) + eps)
        p[i] -= lr * wd * p[i]
    print(t, [repr(x) for x in p])
