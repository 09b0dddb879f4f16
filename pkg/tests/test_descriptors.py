from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, strategies as st

from patrolsense.descriptors import (
    DescriptorProfile,
    Track,
    TrackObservation,
    collect_tracks,
    extract_profile,
    load_question_sets,
    merge_trajectories,
    read_profiles_jsonl,
    resolve_by_majority,
    verify_profile,
    write_profiles_jsonl,
)
from patrolsense.errors import ProviderError, ValidationError
from patrolsense.providers import MockAttributeDescriber, MockSimilarityScorer
from patrolsense.taxonomy import EntityCategory

from conftest import make_frames


def person_track(track_id="t1", session_id="s1", crop="crops/p7.jpg", t0=1000):
    return Track(
        track_id=track_id,
        session_id=session_id,
        entity_class=EntityCategory.Person,
        observations=(
            TrackObservation(frame_index=1, t_ms=t0, bbox=(0, 0, 40, 80), crop_uri=crop),
            TrackObservation(frame_index=2, t_ms=t0 + 1000, bbox=(0, 0, 60, 120), crop_uri=crop),
        ),
    )


P7 = {"shirt_color": "red", "pants_color": "black", "headwear": "none", "bag_present": "yes"}
V2 = {"body_color": "white", "vehicle_type": "sedan", "damage_visible": "no"}


def make_profile(
    entity_id,
    entity_class=EntityCategory.Person,
    crop=None,
    area=100.0,
    first_seen=1000,
    **attrs,
):
    base = {"shirt_color": "red", "pants_color": "black"}
    if entity_class == EntityCategory.Vehicle:
        base = {"body_color": "white", "vehicle_type": "sedan"}
    base.update(attrs)
    return DescriptorProfile(
        entity_id=entity_id,
        entity_class=entity_class,
        attributes=base,
        representative_crop=crop or f"crops/{entity_id}.jpg",
        representative_area=area,
        first_seen_session="s1",
        first_seen_ms=first_seen,
        sessions=("s1",),
        track_ids=(entity_id,),
        track_spans=(("s1", first_seen, first_seen + 5000),),
        verified=True,
    )


def test_collect_tracks_groups_by_id():
    frames = make_frames(5000, tracks=[("a", "Person", 0, 5000), ("b", "Vehicle", 2000, 4000)])
    tracks = collect_tracks("s1", frames)
    assert [t.track_id for t in tracks] == ["a", "b"]
    assert tracks[0].entity_class == EntityCategory.Person
    assert tracks[1].first_seen_ms == 2000


def test_extract_profile_person():
    describer = MockAttributeDescriber({"crops/p7.jpg": P7})
    profile = extract_profile(person_track(), describer)
    assert profile.attributes["shirt_color"] == "red"
    assert profile.attributes["pants_color"] == "black"
    assert profile.attributes["bag_present"] == "yes"
    assert profile.entity_id == "s1:t1"
    assert profile.representative_area == 60 * 120


def test_extract_profile_vehicle():
    track = Track(
        track_id="v2",
        session_id="s1",
        entity_class=EntityCategory.Vehicle,
        observations=(
            TrackObservation(frame_index=0, t_ms=0, bbox=(0, 0, 100, 50), crop_uri="crops/v2.jpg"),
        ),
    )
    describer = MockAttributeDescriber({"crops/v2.jpg": V2})
    profile = extract_profile(track, describer)
    assert profile.attributes["body_color"] == "white"
    assert profile.attributes["vehicle_type"] == "sedan"


def test_extract_profile_requires_crop():
    track = Track(
        track_id="t9",
        session_id="s1",
        entity_class=EntityCategory.Person,
        observations=(TrackObservation(frame_index=0, t_ms=0, bbox=(0, 0, 10, 10)),),
    )
    with pytest.raises(ValidationError, match="no crop available"):
        extract_profile(track, MockAttributeDescriber({}))


def test_extract_profile_unscripted_crop_falls_back_unclear():
    profile = extract_profile(person_track(crop="crops/unknown.jpg"), MockAttributeDescriber({}))
    assert set(profile.attributes.values()) == {"unclear"}
    assert profile.attributes  # never empty


def test_extract_profile_rejects_question_set_missing_required_attributes():
    from patrolsense.providers import AttributeQuestion

    sets = {
        EntityCategory.Person: [
            AttributeQuestion(question_id="q", attribute="headwear", options=("cap",))
        ]
    }
    with pytest.raises(ValidationError, match="required attributes"):
        extract_profile(person_track(), MockAttributeDescriber({}), sets)


def test_verify_keeps_confirmed_attribute():
    describer = MockAttributeDescriber({"crops/p7.jpg": P7})
    profile = extract_profile(person_track(), describer)
    verified = verify_profile(profile, describer)
    assert verified.attributes["shirt_color"] == "red"
    assert verified.verified


def test_verify_demotes_rejected_attribute_to_other():
    extract_describer = MockAttributeDescriber({"crops/p7.jpg": P7})
    profile = extract_profile(person_track(), extract_describer)
    # Verification sees a different truth for the representative crop.
    verify_describer = MockAttributeDescriber(
        {"crops/p7.jpg": {**P7, "shirt_color": "blue"}}
    )
    verified = verify_profile(profile, verify_describer)
    assert verified.attributes["shirt_color"] == "other"
    assert verified.attributes["pants_color"] == "black"


def test_verify_passes_fallbacks_through_without_calls():
    calls = []

    class CountingDescriber(MockAttributeDescriber):
        def describe_attributes(self, crop, entity_class, questions):
            calls.extend(q.attribute for q in questions)
            return super().describe_attributes(crop, entity_class, questions)

    profile = make_profile("s1:t1", shirt_color="unclear", pants_color="other")
    verified = verify_profile(profile, CountingDescriber({}))
    assert verified.attributes["shirt_color"] == "unclear"
    assert verified.attributes["pants_color"] == "other"
    assert "shirt_color" not in calls and "pants_color" not in calls


def test_verify_survivors_reconfirm_as_yes():
    # Every non-fallback attribute that survives verification re-answers
    # "yes" when probed again on the same describer.
    describer = MockAttributeDescriber({"crops/p7.jpg": P7})
    profile = verify_profile(extract_profile(person_track(), describer), describer)
    from patrolsense.providers import AttributeQuestion

    for attribute, value in profile.attributes.items():
        if value in ("other", "unclear"):
            continue
        probe = AttributeQuestion(
            question_id=f"re.{attribute}", attribute=attribute, binary_value=value
        )
        answer = describer.describe_attributes(
            profile.representative_crop, profile.entity_class.value, [probe]
        )[0]
        assert answer.answer == "yes"


def test_verify_provider_failure_demotes_to_unclear_and_flags():
    class FailingDescriber:
        def describe_attributes(self, crop, entity_class, questions):
            raise ProviderError("down")

    profile = make_profile("s1:t1", shirt_color="red")
    verified = verify_profile(profile, FailingDescriber())
    assert verified.attributes["shirt_color"] == "unclear"
    assert any(f.startswith("verify_failed:shirt_color") for f in verified.flags)


# --- resolve_by_majority ---------------------------------------------------------


def test_majority_documented_cases():
    assert resolve_by_majority(["red", "red", "blue"]) == "red"
    assert resolve_by_majority(["red", "blue"]) == "unclear"
    assert resolve_by_majority(["red"]) == "red"


def test_majority_exhaustive_small_multisets():
    values = ("red", "blue", "green")
    for size in range(1, 6):
        for combo in itertools.combinations_with_replacement(values, size):
            result = resolve_by_majority(list(combo))
            counts = {v: combo.count(v) for v in set(combo)}
            top = max(counts.values())
            winners = [v for v, c in counts.items() if c == top]
            if len(winners) == 1:
                assert result == winners[0]
            else:
                assert result == "unclear"


@given(st.lists(st.sampled_from(["red", "blue", "green"]), min_size=1, max_size=9))
def test_majority_is_order_independent(values):
    shuffled = list(values)
    random.Random(0).shuffle(shuffled)
    assert resolve_by_majority(values) == resolve_by_majority(shuffled)


# --- merge_trajectories ---------------------------------------------------------


def test_merge_above_threshold():
    a = make_profile("s1:a", crop="ca")
    b = make_profile("s1:b", crop="cb")
    scorer = MockSimilarityScorer({frozenset(("ca", "cb")): 0.97})
    merged, decisions = merge_trajectories([a, b], scorer)
    assert len(merged) == 1
    assert merged[0].track_ids == ("s1:a", "s1:b")
    assert [d.merged for d in decisions] == [True]


def test_merge_exact_threshold_not_merged():
    a = make_profile("s1:a", crop="ca")
    b = make_profile("s1:b", crop="cb")
    scorer = MockSimilarityScorer({frozenset(("ca", "cb")): 0.95})
    merged, decisions = merge_trajectories([a, b], scorer)
    assert len(merged) == 2
    assert decisions[0].similarity == 0.95 and not decisions[0].merged


def test_merge_fallback_values_never_candidates():
    a = make_profile("s1:a", crop="ca", shirt_color="other")
    b = make_profile("s1:b", crop="cb", shirt_color="other")
    scorer = MockSimilarityScorer({frozenset(("ca", "cb")): 0.99})
    merged, decisions = merge_trajectories([a, b], scorer)
    assert len(merged) == 2
    assert decisions == []


def test_merge_requires_equal_keys_and_class():
    a = make_profile("s1:a", crop="ca", shirt_color="red")
    b = make_profile("s1:b", crop="cb", shirt_color="blue")
    v = make_profile("s1:v", entity_class=EntityCategory.Vehicle, crop="cv")
    scorer = MockSimilarityScorer({}, known_crops={"ca", "cb", "cv"}, default=0.99)
    merged, decisions = merge_trajectories([a, b, v], scorer)
    assert len(merged) == 3
    assert decisions == []


def test_merge_partitions_input():
    profiles = [make_profile(f"s1:p{i}", crop=f"c{i}") for i in range(6)]
    pairs = {frozenset(("c0", "c1")): 0.99, frozenset(("c3", "c4")): 0.98}
    scorer = MockSimilarityScorer(pairs, known_crops={f"c{i}" for i in range(6)})
    merged, _ = merge_trajectories(profiles, scorer)
    all_tracks = sorted(t for p in merged for t in p.track_ids)
    assert all_tracks == sorted(p.entity_id for p in profiles)


def test_merge_transitive_closure():
    profiles = [make_profile(f"s1:p{i}", crop=f"c{i}") for i in range(3)]
    pairs = {frozenset(("c0", "c1")): 0.99, frozenset(("c1", "c2")): 0.99}
    scorer = MockSimilarityScorer(pairs, known_crops={"c0", "c1", "c2"})
    merged, decisions = merge_trajectories(profiles, scorer)
    assert len(merged) == 1
    # The c0-c2 pair was still evaluated and logged for audit.
    assert len(decisions) == 3


def test_merge_permutation_invariant():
    profiles = [make_profile(f"s1:p{i}", crop=f"c{i}", area=10.0 * (i + 1)) for i in range(5)]
    pairs = {frozenset(("c0", "c2")): 0.99, frozenset(("c1", "c4")): 0.96}
    scorer = MockSimilarityScorer(pairs, known_crops={f"c{i}" for i in range(5)})
    baseline, _ = merge_trajectories(profiles, scorer)
    for seed in range(5):
        shuffled = list(profiles)
        random.Random(seed).shuffle(shuffled)
        merged, _ = merge_trajectories(shuffled, scorer)
        assert [p.to_dict() for p in merged] == [p.to_dict() for p in baseline]


def test_merge_majority_resolves_attributes():
    a = make_profile("s1:a", crop="ca", headwear="cap")
    b = make_profile("s1:b", crop="cb", headwear="none")
    c = make_profile("s1:c", crop="cc", headwear="cap")
    pairs = {
        frozenset(("ca", "cb")): 0.99,
        frozenset(("cb", "cc")): 0.99,
        frozenset(("ca", "cc")): 0.99,
    }
    merged, _ = merge_trajectories([a, b, c], MockSimilarityScorer(pairs))
    assert len(merged) == 1
    assert merged[0].attributes["headwear"] == "cap"


def test_merge_representative_is_max_area():
    a = make_profile("s1:a", crop="ca", area=50.0)
    b = make_profile("s1:b", crop="cb", area=400.0)
    merged, _ = merge_trajectories(
        [a, b], MockSimilarityScorer({frozenset(("ca", "cb")): 0.99})
    )
    assert merged[0].representative_crop == "cb"
    assert merged[0].representative_area == 400.0


def test_merge_single_profile_unchanged():
    a = make_profile("s1:a")
    merged, decisions = merge_trajectories([a], MockSimilarityScorer({}, known_crops={"crops/s1:a.jpg"}))
    assert merged == [a]
    assert decisions == []


def test_merge_duplicate_entity_id_rejected():
    a = make_profile("s1:a")
    with pytest.raises(ValidationError, match="duplicate entity_id"):
        merge_trajectories([a, a], MockSimilarityScorer({}))


def test_profiles_jsonl_round_trip(tmp_path):
    profiles = [make_profile("s1:a"), make_profile("s1:b", entity_class=EntityCategory.Vehicle)]
    path = tmp_path / "profiles.jsonl"
    write_profiles_jsonl(profiles, path)
    loaded = read_profiles_jsonl(path)
    assert [p.to_dict() for p in loaded] == [p.to_dict() for p in profiles]


def test_question_sets_cover_required_attributes():
    sets = load_question_sets()
    person_attrs = {q.attribute for q in sets[EntityCategory.Person]}
    vehicle_attrs = {q.attribute for q in sets[EntityCategory.Vehicle]}
    assert {"shirt_color", "pants_color"} <= person_attrs
    assert {"body_color", "vehicle_type"} <= vehicle_attrs
