"""三对角系统的 SOR 迭代内核（numba 编译）

每行 i = 1..M-1：upper[i]·v[i+1] + diag[i]·v[i] + lower[i]·v[i-1] = rhs[i]。
每次扫描后施加边界闭合 v[M] = 0、v[0] = (4v[1] - v[2])/3。

细网格上 1/Δr² 很大，A·v 的舍入误差会把相对残差托在容差之上。
残差落到舍入量级且 STAGNATION_WINDOW 次扫描内没有减半时停止迭代，
由调用方决定是否接受。
"""
import numba
import numpy as np

ROUNDING = 1e3 * np.finfo(np.float64).eps
STAGNATION_WINDOW = 5000


@numba.njit(cache=True, nogil=True)
def residual_and_floor(upper, diag, lower, rhs, v):
    """返回 (相对残差, 舍入下限)，两者都除以 max(1, max|rhs|)"""
    n = v.shape[0]
    scale = 1.0
    worst = 0.0
    row_norm = 0.0
    v_max = 0.0
    for i in range(1, n - 1):
        b = abs(rhs[i])
        if b > scale:
            scale = b
        r = abs(upper[i] * v[i + 1] + diag[i] * v[i] + lower[i] * v[i - 1] - rhs[i])
        if r > worst:
            worst = r
        a = abs(upper[i]) + abs(diag[i]) + abs(lower[i])
        if a > row_norm:
            row_norm = a
    for i in range(n):
        if abs(v[i]) > v_max:
            v_max = abs(v[i])
    floor = ROUNDING * (row_norm * v_max + scale)
    return worst / scale, floor / scale


@numba.njit(cache=True, nogil=True)
def relative_residual(upper, diag, lower, rhs, v):
    """内部行残差的最大范数除以 max(1, max|rhs|)"""
    return residual_and_floor(upper, diag, lower, rhs, v)[0]


@numba.njit(cache=True, nogil=True)
def sor_iterate(upper, diag, lower, rhs, v, omega, tolerance, max_iterations):
    """原地迭代 v，返回 (扫描次数, 最终相对残差, 舍入下限)"""
    n = v.shape[0]
    v[n - 1] = 0.0
    v[0] = (4.0 * v[1] - v[2]) / 3.0
    residual, floor = residual_and_floor(upper, diag, lower, rhs, v)
    best = residual
    since_best = 0
    iterations = 0
    while residual > tolerance and iterations < max_iterations:
        for i in range(1, n - 1):
            gauss_seidel = (rhs[i] - upper[i] * v[i + 1] - lower[i] * v[i - 1]) / diag[i]
            v[i] += omega * (gauss_seidel - v[i])
        v[n - 1] = 0.0
        v[0] = (4.0 * v[1] - v[2]) / 3.0
        iterations += 1
        residual, floor = residual_and_floor(upper, diag, lower, rhs, v)
        if residual < 0.5 * best:
            best = residual
            since_best = 0
        else:
            since_best += 1
        if since_best >= STAGNATION_WINDOW and residual <= floor:
            break
    return iterations, residual, floor
