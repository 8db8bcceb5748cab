"""Arithmetic coding of quantizer outputs.

Builds a probability table from observed codebook indices, then codes
new streams drawn from the same source. The coded size hugs the
entropy bound; a mismatched table decodes to garbage and is rejected
by the checksum.
"""

import numpy as np

from softbitq import entropycoder


def main():
    rng = np.random.default_rng(21)
    # peaked source over 64 symbols, like a trained latent distribution
    weights = np.exp(-0.5 * ((np.arange(64) - 31.5) / 6.0) ** 2)
    p = weights / weights.sum()

    training = rng.choice(64, size=50_000, p=p)
    table = entropycoder.estimate_prob_table(training, size=64)
    entropy = -(table.p * np.log2(table.p)).sum()
    print(f"estimated table entropy: {entropy:.3f} bits/symbol")

    stream = rng.choice(64, size=10_000, p=p)
    blob = entropycoder.ac_encode(stream, table)
    ideal = entropycoder.ideal_bits(stream, table)
    print(f"coded {stream.size} symbols into {blob.payload_bits} bits "
          f"({blob.payload_bits / stream.size:.3f} bits/symbol, "
          f"ideal {ideal / stream.size:.3f})")
    assert np.array_equal(entropycoder.ac_decode(blob, table), stream)
    print("round trip: lossless")

    raw = blob.to_bytes()
    print(f"serialized blob: {len(raw)} bytes including header")
    wrong = entropycoder.estimate_prob_table(rng.integers(0, 64, 1000), size=64)
    try:
        entropycoder.ac_decode(entropycoder.CodedBlob.from_bytes(raw), wrong)
    except entropycoder.DecodeError as e:
        print(f"decoding with the wrong table: rejected ({e})")


if __name__ == "__main__":
    main()
