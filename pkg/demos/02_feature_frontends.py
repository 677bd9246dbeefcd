"""
Audio and text feature frontends
================================

Fixed-duration padding/trimming, the 25 ms / 20 ms sliding frame grid, and
the synthetic frontends whose energy columns expose silence, overlap bursts
and broadband noise.
"""
import numpy as np

from dbdkit import FrontendConfig, extract_audio_features, extract_text_features
from dbdkit.frontends import frame_count, pad_or_trim, tokenize

# At the 15-second default the frame grid has 749 entries.
default_cfg = FrontendConfig(sample_rate=16000)
print("frames at 15.0 s:", frame_count(default_cfg))

cfg = FrontendConfig(audio_dim=8, text_dim=8, target_duration_s=1.0,
                     sample_rate=8000)
print("frames at 1.0 s:", frame_count(cfg))

# Padding is tail-side: a short utterance keeps its onset.
short = np.full(4000, 0.25)            # half a second of "voice"
fixed = pad_or_trim(short, cfg)
print(f"padded {len(short)} -> {len(fixed)} samples; "
      f"tail zeros: {int(np.sum(fixed == 0.0))}")

# The energy column (index 0) is windowed RMS; a burst is localized.
wave = 0.05 * np.sin(2 * np.pi * 150 * np.arange(8000) / 8000)
wave[3000:4000] *= 12.0                # injected high-energy region
feats = extract_audio_features(wave, cfg)
energy = feats.data[:, 0]
print(f"energy column: baseline ~{energy[:10].mean():.3f}, "
      f"burst peak ~{energy.max():.3f} at frame {int(energy.argmax())}")

# Token-level text features: whitespace+punctuation tokens, one hash-seeded
# embedding each; markers <s> and </s> stay atomic.
line = "speaker: User | utterance: the member id is four five | intent: provide_member_id"
print("\ntokens:", tokenize(line))
tf = extract_text_features(line, cfg)
print("text features:", tf.data.shape, "bounded:", float(np.abs(tf.data).max()) <= 10)
