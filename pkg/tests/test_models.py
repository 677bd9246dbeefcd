"""Architecture contracts: shapes, windows, parameter arithmetic, tie rules."""
import numpy as np
import pytest

from dbdkit.corpus import (
    AudioSpec, CorpusSpec, Label, SpeakerTag, TurnsPerCall,
    generate_synthetic_corpus,
)
from dbdkit.encoders import EncoderConfig
from dbdkit.frontends import FrontendConfig
from dbdkit.models import (
    Architecture, E2ELLM, Logits, ModelConfig, ModelStateError, MultAT,
    MultConDB, build_model, export_fusion_embedding, model_card,
)
from dbdkit.nn import Tensor, set_global_seed

ENC = EncoderConfig(conv_channels=8, conv_kernel=5, conv_layers=2,
                    hidden_dim=4, context_window=5, attention_dim=4, dropout=0.0)
FE = FrontendConfig(audio_dim=6, text_dim=6, target_duration_s=0.5,
                    sample_rate=8000)


def make_config(arch, **overrides):
    base = dict(architecture=arch, encoder=ENC, frontend=FE, dropout=0.0,
                e2e_model_dim=8, e2e_heads=2, e2e_layers=2, e2e_head_hidden=12,
                crossmodal_layers=2, crossmodal_heads=2, self_layers=2,
                self_heads=2)
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture(scope="module")
def tiny_corpus():
    spec = CorpusSpec(n_calls=3, turns_per_call=TurnsPerCall(10, 1),
                      breakdown_rate=1.0,
                      audio=AudioSpec(sample_rate=8000, duration_mean_s=0.4,
                                      duration_stdev_s=0.05),
                      seed=3)
    return generate_synthetic_corpus(spec)


ALL_ARCHS = [Architecture.MULTCONDB, Architecture.TEXT_LSTM,
             Architecture.E2E_LLM, Architecture.MULT_AT]


class TestSharedInterface:
    @pytest.mark.parametrize("arch", ALL_ARCHS)
    def test_cold_start_and_shapes(self, arch, tiny_corpus):
        set_global_seed(100)
        model = build_model(make_config(arch)).eval()
        call = tiny_corpus[0]
        state = model.init_state()
        logits, aux, state = model.forward_turn(call.turns[0], state)
        assert logits.values.shape == (2,)
        assert np.all(np.isfinite(logits.values))
        assert state.turns_seen == 1
        assert all(n <= 1 for n in state.buffer_lengths().values())

    @pytest.mark.parametrize("arch", ALL_ARCHS)
    def test_predict_call_cardinality(self, arch, tiny_corpus):
        set_global_seed(101)
        model = build_model(make_config(arch)).eval()
        preds = model.predict_call(tiny_corpus[0])
        assert len(preds) == len(tiny_corpus[0].turns)
        for p, t in zip(preds, tiny_corpus[0].turns):
            assert (p.call_id, p.turn_index) == (t.call_id, t.index)
            assert 0.0 <= p.score <= 1.0

    @pytest.mark.parametrize("arch", ALL_ARCHS)
    def test_causal_window_invariance(self, arch, tiny_corpus):
        """Changing turns older than the window leaves the prediction bits."""
        set_global_seed(102)
        model = build_model(make_config(arch)).eval()
        call = tiny_corpus[0]
        t = 7
        full = model.predict_call(call)[t]
        # replay only the window-5 suffix with fresh state
        state = model.init_state()
        for turn in call.turns[t - 4:t + 1]:
            pred, state = model.predict(turn, state)
        assert pred.score == full.score
        assert pred.label == full.label

    @pytest.mark.parametrize("arch", ALL_ARCHS)
    def test_batched_matches_unbatched(self, arch, tiny_corpus):
        """Training-path forward agrees with per-turn inference numerically."""
        set_global_seed(103)
        model = build_model(make_config(arch)).eval()
        call = tiny_corpus[0]
        samples = [model.make_sample(call, t) for t in range(len(call.turns))]
        batched = model.forward_batch(samples).data
        offline = []
        state = model.init_state()
        for turn in call.turns:
            logits, _, state = model.forward_turn(turn, state)
            offline.append(logits.values)
        np.testing.assert_allclose(batched, np.stack(offline), rtol=1e-9,
                                   atol=1e-10)


class TestMultConDB:
    def test_fusion_dims_add_up(self, tiny_corpus):
        set_global_seed(104)
        model = MultConDB(make_config(Architecture.MULTCONDB)).eval()
        _, aux, _ = model.forward_turn(tiny_corpus[0].turns[0], model.init_state())
        fusion = aux["fusion"]
        assert fusion.vector.shape[0] == sum(fusion.segment_dims)
        assert fusion.segment_dims == (8, 8, 8)  # 2*hidden_dim per branch

    def test_window5_buffer_truncation(self, tiny_corpus):
        set_global_seed(105)
        model = MultConDB(make_config(Architecture.MULTCONDB)).eval()
        call = tiny_corpus[0]
        # run turns 2..6 -> buffers hold 5 embeddings (turns 2-6)
        state_a = model.init_state()
        for turn in call.turns[2:7]:
            _, _, state_a = model.forward_turn(turn, state_a)
        # run turns 3..6 -> buffers hold 4 embeddings (turns 3-6)
        state_b = model.init_state()
        for turn in call.turns[3:7]:
            _, _, state_b = model.forward_turn(turn, state_b)
        la, _, _ = model.forward_turn(call.turns[7], state_a)
        lb, _, _ = model.forward_turn(call.turns[7], state_b)
        np.testing.assert_array_equal(la.values, lb.values)

    def test_mismatched_buffers_raise(self, tiny_corpus):
        set_global_seed(106)
        model = MultConDB(make_config(Architecture.MULTCONDB)).eval()
        state = model.init_state()
        _, _, state = model.forward_turn(tiny_corpus[0].turns[0], state)
        state.buffers["acoustic"].append(state.buffers["acoustic"][0])
        with pytest.raises(ModelStateError):
            model.forward_turn(tiny_corpus[0].turns[1], state)

    def test_after_vector_dim_is_head_hidden(self, tiny_corpus):
        set_global_seed(107)
        model = MultConDB(make_config(Architecture.MULTCONDB, head_hidden=256)).eval()
        _, aux, _ = model.forward_turn(tiny_corpus[0].turns[0], model.init_state())
        assert aux["after"].shape == (256,)


class TestE2E:
    def test_head_parameter_arithmetic(self):
        set_global_seed(108)
        cfg = make_config(Architecture.E2E_LLM, e2e_model_dim=16,
                          e2e_head_hidden=784)
        model = E2ELLM(cfg)
        in_dim = cfg.e2e_model_dim
        expected = in_dim * 784 + 784 + 784 * 2 + 2
        got = (model.head_hidden.weight.data.size + model.head_hidden.bias.data.size
               + model.head_out.weight.data.size + model.head_out.bias.data.size)
        assert got == expected

    def test_zero_vector_zero_head_ties_to_no_breakdown(self):
        set_global_seed(109)
        model = E2ELLM(make_config(Architecture.E2E_LLM))
        for p in (model.head_hidden, model.head_out):
            p.weight.data = np.zeros_like(p.weight.data)
            p.bias.data = np.zeros_like(p.bias.data)
        out = model.classify_vector(Tensor(np.zeros((1, 8))))
        logits = Logits(out.data[0])
        assert logits.values.tolist() == [0.0, 0.0]
        assert logits.label is Label.NO_BREAKDOWN
        assert logits.score == 0.5

    def test_encoder_dim_mismatch_raises(self):
        set_global_seed(110)
        model = E2ELLM(make_config(Architecture.E2E_LLM))
        with pytest.raises(Exception):
            model.classify_vector(Tensor(np.zeros((1, 11))))


class TestMultAT:
    def test_crossmodal_output_lengths(self, tiny_corpus):
        set_global_seed(111)
        model = MultAT(make_config(Architecture.MULT_AT)).eval()
        turn = tiny_corpus[0].turns[0]
        audio = Tensor(model.featurizer.audio(turn)[None])
        text = Tensor(model.featurizer.text(turn)[None])
        a0 = model.conv_audio(audio) + model._positions(audio.shape[1])[None]
        t0 = model.conv_text(text) + model._positions(text.shape[1])[None]
        xa = model.cross_audio[0](a0, keyvalue=t0)
        xt = model.cross_text[0](t0, keyvalue=a0)
        assert xa.shape[1] == audio.shape[1]   # query length preserved
        assert xt.shape[1] == text.shape[1]

    def test_attention_rows_normalized(self, tiny_corpus):
        set_global_seed(112)
        model = MultAT(make_config(Architecture.MULT_AT)).eval()
        turn = tiny_corpus[0].turns[0]
        audio = Tensor(model.featurizer.audio(turn)[None])
        text = Tensor(model.featurizer.text(turn)[None])
        a0 = model.conv_audio(audio)
        t0 = model.conv_text(text)
        layer = model.cross_audio[0]
        _, weights = layer.attn(layer.norm_q(a0), layer.norm_kv(t0),
                                return_weights=True)
        sums = weights.data.sum(axis=-1)
        np.testing.assert_allclose(sums, np.ones_like(sums), atol=1e-6)

    def test_pooled_concat_dim(self, tiny_corpus):
        set_global_seed(113)
        model = MultAT(make_config(Architecture.MULT_AT)).eval()
        assert model.proj1.weight.data.shape[0] == 2 * model.model_dim

    def test_parameter_count_matches_manifest(self):
        set_global_seed(114)
        cfg = make_config(Architecture.MULT_AT)
        model = MultAT(cfg)
        card = model_card(model)
        dim = ENC.conv_channels
        ffn = cfg.ffn_multiple * dim
        per_layer = (
            4 * (dim * dim + dim)        # q, k, v, out projections
            + 3 * (2 * dim)              # three layer norms
            + dim * ffn + ffn            # ffn in
            + ffn * dim + dim)           # ffn out
        n_layers = 2 * cfg.crossmodal_layers + 2 * cfg.self_layers
        conv = ((FE.audio_dim * 5 * dim + dim) + (dim * 5 * dim + dim)
                + (FE.text_dim * 5 * dim + dim) + (dim * 5 * dim + dim))
        heads = ((2 * dim) * dim + dim) + (dim * dim + dim) + (dim * 2 + 2)
        assert card["parameter_count"] == n_layers * per_layer + conv + heads

    def test_stateless_window(self, tiny_corpus):
        set_global_seed(115)
        model = MultAT(make_config(Architecture.MULT_AT)).eval()
        call = tiny_corpus[0]
        full = model.predict_call(call)
        lone_state = model.init_state()
        lone, _ = model.predict(call.turns[5], lone_state)
        assert lone.score == full[5].score


class TestFiniteOutputs:
    @pytest.mark.parametrize("arch", ALL_ARCHS)
    def test_random_turns_yield_finite_logits(self, arch):
        """Random waveforms and token soup through a random-init model."""
        from dbdkit.corpus import Call, Turn, Waveform
        set_global_seed(120)
        model = build_model(make_config(arch)).eval()
        rng = np.random.default_rng(0)
        words = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot",
                 "golf", "hotel", ":", "|", "seven", ""]
        state = model.init_state()
        call_id = "rnd"
        for i in range(250):
            if i % 12 == 0:
                state = model.init_state()
                offset = i
            samples = (rng.uniform(-1, 1, size=int(rng.integers(1, 6000)))
                       .astype(np.float32))
            text = " ".join(rng.choice(words, size=rng.integers(0, 12)))
            turn = Turn(call_id=call_id, index=i - offset,
                        speaker=SpeakerTag.USER if i % 2 else SpeakerTag.AI_AGENT,
                        text=text, intent=str(rng.choice(words)),
                        waveform=Waveform(samples, FE.sample_rate),
                        label=Label.NO_BREAKDOWN)
            logits, _, state = model.forward_turn(turn, state)
            assert np.all(np.isfinite(logits.values))
            assert 0.0 <= logits.score <= 1.0


class TestLogits:
    def test_score_monotone_with_label(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            lg = Logits(rng.normal(size=2))
            assert (lg.label is Label.BREAKDOWN) == (lg.score > 0.5)

    def test_tie_goes_negative(self):
        assert Logits(np.array([1.3, 1.3])).label is Label.NO_BREAKDOWN


class TestExport:
    def test_export_cardinality_and_views(self, tiny_corpus):
        set_global_seed(116)
        model = build_model(make_config(Architecture.MULTCONDB))
        records = export_fusion_embedding(model, tiny_corpus)
        assert len(records) == sum(len(c.turns) for c in tiny_corpus)
        r = records[0]
        assert r.before.shape == (FE.audio_dim + FE.text_dim,)
        assert r.after.shape == (make_config(Architecture.MULTCONDB).head_hidden,)

    def test_model_card_fields(self):
        set_global_seed(117)
        model = build_model(make_config(Architecture.TEXT_LSTM))
        card = model_card(model)
        assert card["architecture"] == "text_lstm"
        assert card["parameter_count"] > 0
        assert all(isinstance(v, list) for v in card["shape_manifest"].values())
