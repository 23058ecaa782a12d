import numpy as np
import pytest

from liqscreen.errors import NoIntradayNewsError
from liqscreen.jump_model import JumpConfig, ModeFit
from liqscreen.market_data import BinGrid
from liqscreen.screening import (
    BOTH,
    JUMP_AT_END,
    JUMP_AT_START,
    FittedModes,
    NewsArticle,
    dedup_news,
    mode_stats,
    read_news,
    select_impactful,
    selection_ratio,
    write_news,
    write_selected,
)
from liqscreen.synth import gaussian_mode_panel

from util import ts

DAY = "2021-03-01"
GRID = BinGrid()


def fits_for(sequences, day=DAY, tickers=None):
    sequences = np.atleast_2d(np.asarray(sequences, dtype=np.int64))
    tickers = tickers or [f"S{i}" for i in range(len(sequences))]
    theta = np.array([[0.0, 0, 0, 0], [1.0, 1, 1, 1]])
    fits = FittedModes()
    fits.add(day, tickers, ModeFit(theta=theta, modes=sequences, loss=0.0, iters=1))
    return fits


def article_in_bin(t, ticker="S0", day=DAY, headline="words here", offset_s=30):
    stamp = ts(day, "09:45:00") + ((t - 1) * 300 + offset_s) * 1000
    return NewsArticle(stamp, ticker, headline)


class TestNewsArticle:
    def test_composed_score(self):
        art = NewsArticle(ts(DAY, "10:00:00"), "AAA", "x y", -1, 39)
        assert art.composed_score == -39

    def test_composed_score_absent_without_vendor_fields(self):
        art = NewsArticle(ts(DAY, "10:00:00"), "AAA", "x y")
        assert art.composed_score is None

    def test_rejects_empty_headline(self):
        with pytest.raises(ValueError):
            NewsArticle(0, "AAA", "")

    def test_rejects_bad_vendor_score(self):
        with pytest.raises(ValueError):
            NewsArticle(0, "AAA", "x", vendor_score=2)


class TestModeStats:
    def test_constant_mode1_sequence(self):
        stats = mode_stats(fits_for(np.ones(72, dtype=int)))
        assert stats.occupancy.tolist() == [1.0, 0.0]
        assert stats.transition.probs[0].tolist() == [1.0, 0.0]
        assert np.isnan(stats.transition.probs[1]).all()

    def test_hand_counted_transitions(self):
        stats = mode_stats(fits_for([1, 1, 2, 2]))
        assert stats.transition.counts.tolist() == [[1, 1], [0, 1]]
        assert stats.transition.probs.tolist() == [[0.5, 0.5], [0.0, 1.0]]

    def test_occupancy_sums_to_one(self):
        rng = np.random.default_rng(0)
        seqs = rng.integers(1, 3, size=(5, 72))
        stats = mode_stats(fits_for(seqs))
        assert stats.occupancy.sum() == pytest.approx(1.0, abs=1e-12)

    def test_rows_reconstruct_frequencies(self):
        rng = np.random.default_rng(1)
        seqs = rng.integers(1, 3, size=(4, 72))
        stats = mode_stats(fits_for(seqs))
        counts = stats.transition.counts
        for i in range(2):
            if counts[i].sum() > 0:
                assert stats.transition.probs[i].sum() == pytest.approx(1.0, abs=1e-12)
                assert np.allclose(
                    stats.transition.probs[i], counts[i] / counts[i].sum()
                )

    def test_daily_jump_count(self):
        stats = mode_stats(fits_for([1, 2, 1, 2, 2, 1]))
        assert stats.daily_jump_counts[(DAY, "S0")] == 2

    def test_diagonal_dominance_on_persistent_data(self):
        # qualitative check on persistent synthetic modes
        rng = np.random.default_rng(7)
        _, modes = gaussian_mode_panel(
            30, 72, [0, 0, 0, 0], [1, 1, 1, 1], [1, 1, 1, 1], 0.95, 0.9, rng
        )
        stats = mode_stats(fits_for(modes))
        probs = stats.transition.probs
        assert probs[0, 0] > probs[0, 1]
        assert probs[1, 1] > probs[1, 0]


class TestSelectImpactful:
    def test_all_calm_day_selects_nothing(self):
        fits = fits_for(np.ones(72, dtype=int))
        news = [article_in_bin(t) for t in (1, 10, 72)]
        result = select_impactful(news, fits, GRID)
        assert result.selected == []
        assert len(result.intraday) == 3

    def test_jump_selects_article_at_start_and_previous_bin(self):
        seq = np.ones(72, dtype=int)
        seq[3:6] = 2  # modes: bins 4..6 are event mode, jump at start of bin 4
        fits = fits_for(seq)
        result = select_impactful(
            [article_in_bin(4), article_in_bin(3), article_in_bin(10)], fits, GRID
        )
        reasons = {t: reason for _, t, reason in result.selected}
        assert reasons[4] == JUMP_AT_START
        assert reasons[3] == JUMP_AT_END
        assert 10 not in reasons

    def test_first_bin_selected_only_via_end_scenario(self):
        seq = np.ones(72, dtype=int)
        seq[1] = 2  # jump at the end of bin 1
        result = select_impactful([article_in_bin(1)], fits_for(seq), GRID)
        assert [(t, r) for _, t, r in result.selected] == [(1, JUMP_AT_END)]

    def test_one_article_selected_once_with_single_reason(self):
        # the start scenario needs the article's bin in mode 2 and the end
        # scenario needs it in mode 1, so a single article can never carry
        # both reasons; the screen records exactly one
        seq = np.array([1] * 72)
        seq[2] = 1   # bin 3
        seq[3] = 2   # bin 4: jump at start of 4
        seq[4] = 1   # bin 5
        seq[5] = 2   # bin 6: jump at end of bin 5
        result = select_impactful([article_in_bin(4)], fits_for(seq), GRID)
        assert [(t, r) for _, t, r in result.selected] == [(4, JUMP_AT_START)]
        res2 = select_impactful([article_in_bin(5)], fits_for(seq), GRID)
        assert [(t, r) for _, t, r in res2.selected] == [(5, JUMP_AT_END)]

    def test_boundary_truth_table(self):
        # exhaustive neighbour-mode combinations at bins 1, 2, 71, 72
        n_bins = GRID.n_bins
        for t in (1, 2, 71, 72):
            for trio in range(8):
                m_prev, m_here, m_next = (trio & 1) + 1, ((trio >> 1) & 1) + 1, \
                    ((trio >> 2) & 1) + 1
                seq = np.ones(n_bins, dtype=int)
                if t >= 2:
                    seq[t - 2] = m_prev
                seq[t - 1] = m_here
                if t <= n_bins - 1:
                    seq[t] = m_next
                expected = bool(
                    (t >= 2 and seq[t - 2] == 1 and seq[t - 1] == 2)
                    or (t <= n_bins - 1 and seq[t - 1] == 1 and seq[t] == 2)
                )
                result = select_impactful([article_in_bin(t)], fits_for(seq), GRID)
                assert bool(result.selected) == expected, (t, seq[max(0, t - 2):t + 1])

    def test_unfitted_ticker_excluded_with_reason(self):
        result = select_impactful(
            [article_in_bin(4, ticker="ZZZ")], fits_for(np.ones(72, dtype=int)), GRID
        )
        assert result.selected == []
        assert result.excluded[0][1] == "no fitted modes for (ticker, day)"

    def test_out_of_session_articles_excluded(self):
        art = NewsArticle(ts(DAY, "08:00:00"), "S0", "pre open words")
        result = select_impactful([art], fits_for(np.ones(72, dtype=int)), GRID)
        assert result.intraday == []
        assert result.excluded[0][1] == "outside trimmed session"

    def test_order_independence(self):
        seq = np.ones(72, dtype=int)
        seq[10] = 2
        news = [article_in_bin(t, headline=f"headline {t}") for t in range(1, 20)]
        a = select_impactful(news, fits_for(seq), GRID)
        b = select_impactful(news[::-1], fits_for(seq), GRID)
        assert {x[0] for x in a.selected} == {x[0] for x in b.selected}

    def test_flip_to_calm_never_adds_target_dependent_selection(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            seq = rng.integers(1, 3, size=72)
            news = [article_in_bin(t, headline=f"h {t}") for t in range(1, 73)]
            before = select_impactful(news, fits_for(seq), GRID)
            twos = np.flatnonzero(seq == 2)
            if not len(twos):
                continue
            b = int(rng.choice(twos))
            flipped = seq.copy()
            flipped[b] = 1
            after = select_impactful(news, fits_for(flipped), GRID)
            new_keys = {x[0] for x in after.selected} - {x[0] for x in before.selected}
            for art in new_keys:
                t = [x[1] for x in after.selected if x[0] == art][0]
                # a new selection can never have bin b+1 as its jump target
                reason = [x[2] for x in after.selected if x[0] == art][0]
                if reason in (JUMP_AT_START, BOTH):
                    assert t - 1 != b + 1 or flipped[t - 1] == 2
                if reason in (JUMP_AT_END, BOTH):
                    assert t != b + 1 or flipped[t] == 2


class TestDedupAndRatio:
    def test_dedup_keeps_earliest_within_window(self):
        base = ts(DAY, "10:00:00")
        arts = [
            NewsArticle(base, "AAA", "same words"),
            NewsArticle(base + 30_000, "AAA", "same words"),
            NewsArticle(base + 120_000, "AAA", "same words"),
            NewsArticle(base + 10_000, "BBB", "same words"),
        ]
        kept = dedup_news(arts)
        assert len(kept) == 3
        assert kept[0].timestamp == base

    def test_selection_ratio(self):
        news = [article_in_bin(t, headline=f"h {t}") for t in range(1, 13)]
        assert selection_ratio(news, news[:3]) == pytest.approx(0.25)
        assert selection_ratio(news, []) == 0.0

    def test_selection_ratio_requires_intraday_news(self):
        with pytest.raises(NoIntradayNewsError):
            selection_ratio([], [])


class TestNewsIO:
    def test_round_trip_with_quoted_headline(self, tmp_path):
        arts = [
            NewsArticle(ts(DAY, "10:00:00"), "AAA", 'board says "yes", twice', 1, 98),
            NewsArticle(ts(DAY, "10:05:00"), "BBB", "plain words", None, None),
        ]
        path = tmp_path / "news.csv"
        write_news(path, arts)
        back = read_news(path)
        assert back == arts

    def test_selected_reason_column(self, tmp_path):
        seq = np.ones(72, dtype=int)
        seq[3] = 2
        result = select_impactful([article_in_bin(4)], fits_for(seq), GRID)
        path = tmp_path / "selected.csv"
        write_selected(path, result)
        text = path.read_text().splitlines()
        assert text[0].endswith("selected_reason")
        assert text[1].endswith(JUMP_AT_START)


class TestFittedModesIO:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        fits = FittedModes()
        for day in ("2021-03-01", "2021-03-02"):
            modes = rng.integers(1, 3, size=(3, 72))
            theta = rng.normal(size=(2, 4))
            fits.add(day, ["AAA", "BBB", "CCC"],
                     ModeFit(theta=theta, modes=modes, loss=1.0, iters=2))
        fits.save(tmp_path)
        back = FittedModes.load(tmp_path)
        assert sorted(back.days) == ["2021-03-01", "2021-03-02"]
        for day, ticker, seq in fits.iter_sequences():
            assert np.array_equal(back.sequence(day, ticker), seq)
