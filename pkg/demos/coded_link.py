"""One coded transmission end to end.

Payload -> LDPC encode -> QPSK -> Rayleigh fading -> exact LLRs ->
belief propagation. Prints the decoder's progress at a few SNRs so the
error-correction cliff is visible.
"""

import numpy as np

from softbitq import channel, ldpc, modem


def main():
    rng = np.random.default_rng(3)
    code = ldpc.build_wlan_code()
    const = modem.build_constellation(2)

    payload = rng.integers(0, 2, (50, code.k), dtype=np.int8)
    cw = ldpc.encode(payload, code)
    bits = cw.reshape(50, -1, 2)

    for snr_db in (0.0, 4.0, 8.0):
        sigma_n = channel.snr_db_to_sigma_n(snr_db)
        x = modem.modulate(bits, const)
        h = channel.sample_iid_rayleigh(rng, x.shape)
        y = channel.transmit(x, h, sigma_n, rng)
        llrs = modem.compute_llr(y, h, sigma_n, const).reshape(50, -1)
        decoded, iters, ok = ldpc.decode_bp_batch(-llrs, code, max_iter=50)
        errors = (decoded[:, :code.k] != payload).any(axis=1).sum()
        print(f"{snr_db:4.1f} dB: {errors:2d}/50 block errors, "
              f"mean {iters.mean():5.1f} BP iterations, "
              f"{ok.mean():.0%} satisfied the parity checks")


if __name__ == "__main__":
    main()
