"""Pure-python stand-in for the compiled sampling kernel (same contract,
bit-identical output for the same uniforms)."""

import numpy as np

_CHUNK = 1 << 20


def sample_path(succ_state, succ_cum, row_start, start, uniforms):
    su = succ_state.tolist()
    cu = succ_cum.tolist()
    rs = row_start.tolist()
    s = int(start)
    parts = [np.array([s], dtype=np.int32)]
    for c0 in range(0, len(uniforms), _CHUNK):
        chunk = uniforms[c0 : c0 + _CHUNK].tolist()
        arr = np.empty(len(chunk), dtype=np.int32)
        for i, u in enumerate(chunk):
            j = rs[s]
            while cu[j] < u:
                j += 1
            s = su[j]
            arr[i] = s
        parts.append(arr)
    return np.concatenate(parts)
