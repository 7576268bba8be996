import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import largest_remainder as ref_apportion
from pedcrash.dataset import (Dataset, decode_record, encode_record, largest_remainder, load_csv,
                              profile, stratified_holdout, stratified_kfold, synthesize_table1,
                              write_csv)
from pedcrash.errors import SchemaError, StratificationError, ValidationError
from pedcrash.schema import BINARY, CATEGORICAL, CATEGORY_TOTALS, CONTINUOUS, CRASH_SCHEMA, LEVEL_COUNTS

NAMES = CRASH_SCHEMA.names


def raw_record(**overrides):
    rec = {spec.name: spec.levels[0][0] for spec in CRASH_SCHEMA if spec.discrete}
    rec["AgeText"] = "34"
    rec.update(overrides)
    return rec


def write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(f'"{v}"' if "," in v else v for v in r) + "\n")


# -- schema ---------------------------------------------------------------------

def test_schema_has_seventeen_unique_features():
    assert len(CRASH_SCHEMA) == 17
    assert len(set(NAMES)) == 17
    assert NAMES[:3] == ["Sex", "AgeText", "AlcoholDrugTest"]


def test_level_codes_follow_kind_rules():
    for spec in CRASH_SCHEMA:
        codes = [c for _, c in spec.levels]
        if spec.kind == BINARY:
            assert sorted(codes) == [0, 1]
        elif spec.kind == CATEGORICAL:
            assert codes == list(range(1, len(codes) + 1))
        else:
            assert spec.kind == CONTINUOUS and spec.levels == ()


def test_level_maps_cover_the_descriptive_table():
    for spec in CRASH_SCHEMA:
        if spec.discrete:
            assert set(LEVEL_COUNTS[spec.name]) == {name for name, _ in spec.levels}


# -- encoding -------------------------------------------------------------------

def test_encode_examples():
    x = encode_record(raw_record(DUI="Yes", Sex="Female", Light="Dark-Not lighted", RoadType="Rural"))
    assert x[CRASH_SCHEMA.index("DUI")] == 1.0
    assert x[CRASH_SCHEMA.index("Sex")] == 0.0
    assert x[CRASH_SCHEMA.index("Light")] == 1.0
    assert x[CRASH_SCHEMA.index("RoadType")] == 1.0
    assert x[CRASH_SCHEMA.index("AgeText")] == 34.0


def test_encode_male_and_last_light_level():
    x = encode_record(raw_record(Sex="Male", Light="Others", Weather="Fog, Smog"))
    assert x[CRASH_SCHEMA.index("Sex")] == 1.0
    assert x[CRASH_SCHEMA.index("Light")] == 6.0
    assert x[CRASH_SCHEMA.index("Weather")] == 4.0


@pytest.mark.parametrize("field,value", [("Light", "Twilight"), ("AgeText", "old"), ("DUI", "")])
def test_encode_rejects_bad_cells(field, value):
    with pytest.raises(ValidationError):
        encode_record(raw_record(**{field: value}))


def test_encode_rejects_missing_feature():
    rec = raw_record()
    del rec["Weather"]
    with pytest.raises(SchemaError) as err:
        encode_record(rec)
    assert err.value.column == "Weather"


@st.composite
def records(draw):
    rec = {}
    for spec in CRASH_SCHEMA:
        if spec.discrete:
            rec[spec.name] = draw(st.sampled_from([name for name, _ in spec.levels]))
        else:
            rec[spec.name] = repr(draw(st.floats(0, 100, allow_nan=False)))
    return rec


@given(records())
def test_decode_inverts_encode(rec):
    assert decode_record(encode_record(rec)) == rec


# -- CSV ------------------------------------------------------------------------

def test_load_csv_three_rows(tmp_path):
    rows = [[raw_record()[n] for n in NAMES] + [s] for s in ("Minor injury", "Fatal", "1")]
    path = tmp_path / "ok.csv"
    write_rows(path, NAMES + ["Severity"], rows)
    data = load_csv(path)
    assert data.n_rows == 3
    assert data.y.tolist() == [0, 2, 1]


def test_load_csv_any_column_order(tmp_path):
    header = ["Severity"] + NAMES[::-1]
    rec = raw_record(Light="Dawn")
    path = tmp_path / "rev.csv"
    write_rows(path, header, [["Fatal"] + [rec[n] for n in NAMES[::-1]]])
    data = load_csv(path)
    assert data.X[0, CRASH_SCHEMA.index("Light")] == 5.0


def test_load_csv_missing_column_names_it(tmp_path):
    header = [n for n in NAMES if n != "Light"] + ["Severity"]
    path = tmp_path / "bad.csv"
    write_rows(path, header, [])
    with pytest.raises(SchemaError) as err:
        load_csv(path)
    assert err.value.column == "Light"
    assert "Light" in str(err.value)


def test_load_csv_unknown_column(tmp_path):
    path = tmp_path / "extra.csv"
    write_rows(path, NAMES + ["Severity", "County"], [])
    with pytest.raises(SchemaError) as err:
        load_csv(path)
    assert err.value.column == "County"


def test_load_csv_bad_level_reports_row(tmp_path):
    good = [raw_record()[n] for n in NAMES] + ["Fatal"]
    bad = [raw_record(Light="Twilight")[n] for n in NAMES] + ["Fatal"]
    path = tmp_path / "level.csv"
    write_rows(path, NAMES + ["Severity"], [good, good, bad])
    with pytest.raises(ValidationError) as err:
        load_csv(path)
    assert err.value.row == 2
    assert "Twilight" in str(err.value)


def test_load_csv_missing_cell_reports_row(tmp_path):
    bad = [raw_record()[n] for n in NAMES] + [""]
    path = tmp_path / "hole.csv"
    write_rows(path, NAMES + ["Severity"], [bad])
    with pytest.raises(ValidationError) as err:
        load_csv(path)
    assert err.value.row == 0


def test_load_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ValidationError):
        load_csv(path)


def test_csv_round_trip(tmp_path, small_data):
    path = tmp_path / "rt.csv"
    write_csv(small_data, path)
    back = load_csv(path)
    assert np.array_equal(back.y, small_data.y)
    age = CRASH_SCHEMA.index("AgeText")
    other = [j for j in range(17) if j != age]
    assert np.array_equal(back.X[:, other], small_data.X[:, other])
    assert np.max(np.abs(back.X[:, age] - small_data.X[:, age])) <= 5e-5


def test_dataset_rejects_invalid_codes():
    X = np.zeros((1, 17))
    with pytest.raises(ValidationError):  # categorical codes start at 1
        Dataset(X, [0])


def test_dataset_is_read_only(small_data):
    with pytest.raises(ValueError):
        small_data.X[0, 0] = 5


# -- splitting -------------------------------------------------------------------

def test_kfold_one_per_category_each_fold():
    y = np.array([0, 1, 2] * 3)
    folds = stratified_kfold(y, 3, seed=5)
    for f in folds:
        assert sorted(y[f].tolist()) == [0, 1, 2]


def test_kfold_table_counts_fatal_per_fold():
    y = np.repeat([0, 1, 2], CATEGORY_TOTALS)
    folds = stratified_kfold(y, 10, seed=1)
    assert {int(np.sum(y[f] == 2)) for f in folds} <= {47, 48}


def test_kfold_rejects_small_category():
    y = np.array([0] * 5 + [1] * 5 + [2])
    with pytest.raises(StratificationError) as err:
        stratified_kfold(y, 2, seed=0)
    assert err.value.category == 2


@given(st.lists(st.integers(0, 2), min_size=30, max_size=200), st.integers(2, 6), st.integers(0, 2**32))
def test_kfold_partition_property(labels, k, seed):
    y = np.array(labels + [0, 1, 2] * k)
    folds = stratified_kfold(y, k, seed)
    allidx = np.sort(np.concatenate(folds))
    assert np.array_equal(allidx, np.arange(y.size))
    for c in range(3):
        per = [int(np.sum(y[f] == c)) for f in folds]
        assert max(per) - min(per) <= 1
    assert all(np.array_equal(a, b) for a, b in zip(folds, stratified_kfold(y, k, seed)))


def test_holdout_is_stratified_and_disjoint():
    y = np.repeat([0, 1, 2], CATEGORY_TOTALS)
    train, hold = stratified_holdout(y, 0.3, seed=4)
    assert np.intersect1d(train, hold).size == 0
    assert train.size + hold.size == y.size
    assert np.bincount(y[hold]).tolist() == [1944, 409, 143]


# -- synthesis --------------------------------------------------------------------

def test_synth_exact_category_totals():
    data = synthesize_table1(8319, 7)
    assert data.counts().tolist() == [6480, 1363, 476]


@given(st.integers(100, 20000))
def test_synth_totals_are_largest_remainder(n):
    assert largest_remainder(CATEGORY_TOTALS, n).tolist() == ref_apportion(CATEGORY_TOTALS, n)


@given(st.integers(100, 3000), st.integers(0, 10**6))
def test_synth_counts_any_n(n, seed):
    data = synthesize_table1(n, seed)
    assert data.counts().tolist() == ref_apportion(CATEGORY_TOTALS, n)


def test_synth_intersection_share():
    data = synthesize_table1(8319, 7)
    yes = int(np.sum(data.X[:, CRASH_SCHEMA.index("Intersection")] == 1))
    assert abs(yes - 5091) <= 0.02 * 8319


def test_synth_deterministic():
    a = synthesize_table1(500, 99, interactions=True)
    b = synthesize_table1(500, 99, interactions=True)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_synth_ages_in_bands():
    data = synthesize_table1(2000, 1)
    age = data.X[:, CRASH_SCHEMA.index("AgeText")]
    assert age.min() >= 0 and age.max() <= 90


def test_interactions_couple_dark_and_midblock():
    plain = synthesize_table1(8319, 3, interactions=False)
    coupled = synthesize_table1(8319, 3, interactions=True)
    li, ii = CRASH_SCHEMA.index("Light"), CRASH_SCHEMA.index("Intersection")

    def cell_share(data):
        fatal = data.X[data.y == 2]
        return np.mean((fatal[:, li] == 1) & (fatal[:, ii] == 0))

    # independent product of the fatal marginals vs the boosted joint cell
    p = (176 / 484) * (340 / 476)
    assert abs(cell_share(plain) - p) < 0.02
    assert abs(cell_share(coupled) - 2 * p / (1 + p)) < 0.01
    # other categories untouched by the coupling
    assert np.array_equal(plain.counts(), coupled.counts())


def test_synth_rejects_small_n():
    with pytest.raises(ValidationError):
        synthesize_table1(99, 0)


# -- profiling ----------------------------------------------------------------------

def test_profile_single_fatal_row():
    x = encode_record(raw_record(DUI="Yes"))
    prof = profile(Dataset(x[None, :], [2]))
    row = prof.lookup("DUI", "Yes")
    assert row.total == 1 and row.by_category == (0, 0, 1)
    assert prof.percent(row) == 100 and prof.percent(row, 2) == 100


def test_profile_all_minor_has_zero_fatal():
    data = synthesize_table1(500, 0)
    minor = data.subset(np.flatnonzero(data.y == 0))
    prof = profile(minor)
    assert all(r.by_category[2] == 0 for r in prof.rows)


def test_profile_counts_sum_to_rows(small_data):
    prof = profile(small_data)
    for name in NAMES:
        assert sum(r.total for r in prof.rows if r.feature == name) == small_data.n_rows


def test_profile_header_matches_totals():
    md = profile(synthesize_table1(8319, 2)).to_markdown()
    header = md.splitlines()[2]
    assert "476 (6%)" in header and "1363 (16%)" in header and "6480 (78%)" in header


@pytest.mark.parametrize("seed", range(10))
def test_profile_matches_published_percentages(seed):
    prof = profile(synthesize_table1(8319, seed))
    totals = CATEGORY_TOTALS
    for feature, levels in LEVEL_COUNTS.items():
        for level, counts in levels.items():
            row = prof.lookup(feature, level)
            if sum(counts) >= 100:
                assert abs(100 * row.total / 8319 - 100 * sum(counts) / 8319) <= 2
            for c in range(3):
                if counts[c] >= 100:
                    share = 100 * row.by_category[c] / prof.category_counts[c]
                    assert abs(share - 100 * counts[c] / totals[c]) <= 2


def test_empty_profile_rejected():
    with pytest.raises(ValidationError):
        profile(Dataset(np.zeros((0, 17)), []))
