"""Parser and serializer tests, including the published dialog-table fixtures."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from todkit.apicall import (
    ApiCall,
    ParseStatus,
    normalize_name,
    parse_apicall,
    serialize_apicall,
)

# Turn-3 outputs of dialog 1_00001 as printed in the source dialog table,
# one row per system. Quoting styles and brace usage vary by row on purpose.
GOLD_TURN3 = (
    "ApiCall(method='ReserveRestaurant', parameters= 'date': '2019-03-11', "
    "'location': 'San Francisco', 'number_of_seats': '2',"
    "'restaurant_name': 'Butterfly Restaurant', 'time': '11:30' )"
)
SOLOIST_TURN3 = (
    "ApiCall(method='ReserveRestaurant', parameters={'city': 'San Francisco', "
    "'date': '2019-03-11', 'party_size': '2','restaurant_name': 'The Butterfly Restaurant', "
    "'time': '11:30'})"
)
AUTOTOD_TURN3 = (
    "ApiCall(method='FindRestaurants',parameters='category': 'Butterfly', "
    "'location': 'San Francisco')"
)
GPT2_TURN3 = (
    "ApiCall(method='ReserveRestaurant', parameters='date': '2019-03-11', "
    "'location': 'San Francisco', 'number_of_seats': '2','restaurant_name': "
    "'The Butterfly Restaurant', 'time': '11:30')"
)
LLAMA_TURN3 = (
    "ApiCall(method='ReserveRestaurant', parameters='date': '2019-03-11', "
    "'location': 'San Francisco', 'number_of_seats': '2','restaurant_name': "
    "'Butterfly Restaurant', 'time': '11:30')"
)
FLAN_T5_TURN3 = (
    "ApiCall(method='ReserveRestaurant', parameters= 'date': '2019-03-11', "
    "'location': 'San Francisco','restaurant_name': 'Butterfly Restaurant', "
    "'number_of_seats': '2', 'time': '11:30' )"
)
BUSES_UNBALANCED = "APICall(method=FindBus, parameters=from_station=LA, to_station=SFO })"


class TestDialogTableFixtures:
    def test_gold_turn3(self):
        outcome = parse_apicall(GOLD_TURN3)
        assert outcome.status is ParseStatus.PARSED
        assert outcome.call.method == "ReserveRestaurant"
        assert outcome.call.params == (
            ("date", "2019-03-11"),
            ("location", "San Francisco"),
            ("number_of_seats", "2"),
            ("restaurant_name", "Butterfly Restaurant"),
            ("time", "11:30"),
        )

    def test_soloist_turn3(self):
        outcome = parse_apicall(SOLOIST_TURN3)
        assert outcome.status is ParseStatus.PARSED
        assert outcome.call.method == "ReserveRestaurant"
        assert outcome.call.params == (
            ("city", "San Francisco"),
            ("date", "2019-03-11"),
            ("party_size", "2"),
            ("restaurant_name", "The Butterfly Restaurant"),
            ("time", "11:30"),
        )

    def test_autotod_turn3(self):
        outcome = parse_apicall(AUTOTOD_TURN3)
        assert outcome.status is ParseStatus.PARSED
        assert outcome.call.method == "FindRestaurants"
        assert outcome.call.params == (
            ("category", "Butterfly"),
            ("location", "San Francisco"),
        )

    @pytest.mark.parametrize("text", [GPT2_TURN3, LLAMA_TURN3])
    def test_gpt2_and_llama_turn3(self, text):
        outcome = parse_apicall(text)
        assert outcome.status is ParseStatus.PARSED
        assert outcome.call.method == "ReserveRestaurant"
        assert outcome.call.param_names() == (
            "date",
            "location",
            "number_of_seats",
            "restaurant_name",
            "time",
        )

    def test_flan_t5_turn3_orders_params_as_written(self):
        outcome = parse_apicall(FLAN_T5_TURN3)
        assert outcome.status is ParseStatus.PARSED
        assert outcome.call.param_names() == (
            "date",
            "location",
            "restaurant_name",
            "number_of_seats",
            "time",
        )

    def test_buses_stray_brace(self):
        outcome = parse_apicall(BUSES_UNBALANCED)
        assert outcome.status is ParseStatus.PARSED
        assert outcome.call.method == "FindBus"
        assert outcome.call.params == (("from_station", "LA"), ("to_station", "SFO"))


class TestToleranceMatrix:
    def test_plain_text_is_not_a_call(self):
        outcome = parse_apicall("Your table has been booked.")
        assert outcome.status is ParseStatus.NOT_AN_APICALL
        assert outcome.call is None

    def test_bare_keyword_without_paren_is_not_a_call(self):
        assert parse_apicall("I will make an ApiCall now.").status is ParseStatus.NOT_AN_APICALL

    def test_keyword_embedded_in_word_does_not_count(self):
        assert parse_apicall("megapicall(method=X)").status is ParseStatus.NOT_AN_APICALL

    def test_surrounding_prose_tolerated(self):
        text = "Sure, booking now. ApiCall(method='A', parameters={'x': '1'}) Done!"
        outcome = parse_apicall(text)
        assert outcome.status is ParseStatus.PARSED
        assert outcome.call == ApiCall("A", (("x", "1"),))

    def test_two_calls_malformed(self):
        text = "ApiCall(method='A', parameters={}) ApiCall(method='B', parameters={})"
        outcome = parse_apicall(text)
        assert outcome.status is ParseStatus.MALFORMED
        assert "2" in outcome.diagnostic

    def test_mixed_quotes_and_separators(self):
        text = 'apicall(method:`FindBus`, parameters={"origin"="LA", \'destination\': `SFO`})'
        outcome = parse_apicall(text)
        assert outcome.status is ParseStatus.PARSED
        assert outcome.call == ApiCall("FindBus", (("origin", "LA"), ("destination", "SFO")))

    def test_empty_parameter_list(self):
        for text in ["ApiCall(method='Ping', parameters={})", "ApiCall(method='Ping', parameters=)"]:
            outcome = parse_apicall(text)
            assert outcome.status is ParseStatus.PARSED
            assert outcome.call == ApiCall("Ping", ())

    def test_quoted_comma_value(self):
        text = "ApiCall(method='M', parameters={'location': 'San Francisco, CA'})"
        outcome = parse_apicall(text)
        assert outcome.call.params == (("location", "San Francisco, CA"),)

    def test_duplicate_names_malformed_with_diagnostic(self):
        text = "ApiCall(method='M', parameters={'date': '1', 'Date ': '2'})"
        outcome = parse_apicall(text)
        assert outcome.status is ParseStatus.MALFORMED
        assert "Date" in outcome.diagnostic

    @pytest.mark.parametrize(
        "text",
        [
            "ApiCall(",
            "ApiCall()",
            "ApiCall(method=)",
            "ApiCall(method='A')",
            "ApiCall(method='A', parameters={'x': 'y'",
            "ApiCall(method='A' parameters={})",
            "ApiCall(method='A', parameters={'x' 'y'})",
            "ApiCall(method='unterminated, parameters={})",
        ],
        ids=repr,
    )
    def test_broken_bodies_malformed(self, text):
        outcome = parse_apicall(text)
        assert outcome.status is ParseStatus.MALFORMED
        assert outcome.diagnostic

    def test_determinism(self):
        assert parse_apicall(GOLD_TURN3) == parse_apicall(GOLD_TURN3)


class TestSerializer:
    def test_single_param_canonical_form(self):
        call = ApiCall("FindBus", (("origin", "LA"),))
        assert serialize_apicall(call) == "ApiCall(method='FindBus', parameters={'origin': 'LA'})"

    def test_internal_quote_escaped(self):
        call = ApiCall("M", (("name", "Joe's Diner"),))
        text = serialize_apicall(call)
        assert "Joe\\'s Diner" in text
        assert parse_apicall(text).call == call

    def test_comma_value_round_trips(self):
        call = ApiCall("M", (("location", "San Francisco, CA"),))
        assert parse_apicall(serialize_apicall(call)).call == call


def _api_calls() -> st.SearchStrategy[ApiCall]:
    text = st.text(min_size=1, max_size=20)
    names = st.text(min_size=1, max_size=15).filter(lambda s: normalize_name(s))

    def build(method: str, pairs: list[tuple[str, str]]) -> ApiCall:
        unique, seen = [], set()
        for name, value in pairs:
            key = normalize_name(name)
            if key not in seen:
                seen.add(key)
                unique.append((name, value))
        return ApiCall(method, tuple(unique))

    return st.builds(build, text, st.lists(st.tuples(names, st.text(max_size=20)), max_size=6))


@given(_api_calls())
@settings(max_examples=300)
def test_round_trip_property(call):
    outcome = parse_apicall(serialize_apicall(call))
    assert outcome.status is ParseStatus.PARSED
    assert outcome.call == call


@given(st.binary(max_size=80))
@settings(max_examples=500)
def test_parser_total_on_random_bytes(data):
    outcome = parse_apicall(data.decode("utf-8", errors="replace"))
    assert outcome.status in ParseStatus


@given(st.text(max_size=120))
@settings(max_examples=500)
def test_parser_total_on_random_text(text):
    parse_apicall(text)


class TestApiCallInvariants:
    def test_empty_method_rejected(self):
        with pytest.raises(ValueError):
            ApiCall("", ())

    def test_duplicate_normalized_names_rejected(self):
        with pytest.raises(ValueError):
            ApiCall("M", (("origin", "LA"), (" ORIGIN ", "SFO")))
