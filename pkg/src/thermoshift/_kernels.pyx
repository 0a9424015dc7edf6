# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel: sequential Markov path sampling.

The transition table is flattened CSR-style: row ``s`` owns entries
``row_start[s]:row_start[s+1]`` of ``succ_state``/``succ_cum``, with
cumulative probabilities ending exactly at 1.0.
"""

import numpy as np

cimport numpy as cnp


def sample_path(cnp.int32_t[::1] succ_state, cnp.float64_t[::1] succ_cum,
                cnp.int64_t[::1] row_start, int start, cnp.float64_t[::1] uniforms):
    cdef Py_ssize_t L = uniforms.shape[0]
    out = np.empty(L + 1, dtype=np.int32)
    cdef cnp.int32_t[::1] states = out
    cdef Py_ssize_t t
    cdef cnp.int64_t j
    cdef int s = start
    cdef double u
    states[0] = s
    for t in range(L):
        u = uniforms[t]
        j = row_start[s]
        while succ_cum[j] < u:
            j += 1
        s = succ_state[j]
        states[t + 1] = s
    return out
