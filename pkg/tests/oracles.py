"""Independent reference computations used to check the estimator.

The brute-force search below knows nothing about the closed form: it
enumerates integer slot pairs in increasing total and keeps the first
total that fits the budget. Kept deliberately naive.
"""

import math


def fits(map_work, reduce_work, map_slots, reduce_slots, budget, tol=1e-9):
    """Does the serial two-phase plan fit the budget?"""
    total = 0.0
    if map_work > 0:
        if map_slots < 1:
            return False
        total += map_work / map_slots
    if reduce_work > 0:
        if reduce_slots < 1:
            return False
        total += reduce_work / reduce_slots
    return total <= budget + tol


def brute_force_min_sum(map_work, reduce_work, budget, max_sum):
    """Smallest feasible map+reduce slot total, or None within max_sum."""
    for s in range(0, max_sum + 1):
        for n_map in range(0, s + 1):
            if fits(map_work, reduce_work, n_map, s - n_map, budget):
                return s
    return None


def continuous_optimum_sum(map_work, reduce_work, budget):
    """Lower bound on any feasible slot total (real-valued relaxation)."""
    return (math.sqrt(map_work) + math.sqrt(reduce_work)) ** 2 / budget
