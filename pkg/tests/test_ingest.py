"""Reader/writer tests over the checked-in corpus fixtures."""

import json
from pathlib import Path

import pytest

from todkit.errors import DuplicateDomainError, EmptySchemaError, MalformedFileError
from todkit.ingest import ingest_dialogs, ingest_schemas, write_dialogs, write_schemas
from todkit.schema import OutputKind

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture()
def catalog():
    return ingest_schemas(FIXTURES / "three_domains_native.json", format="NATIVE_JSON")


class TestSchemas:
    def test_sgd_restaurants_entry(self):
        catalog = ingest_schemas(FIXTURES / "sgd_schema.json", format="SGD_JSON")
        schema = catalog.get("Restaurants")
        assert schema is not None
        reserve = schema.intent("ReserveRestaurant")
        assert [s.name for s in reserve.required_slots()] == ["restaurant_name", "location", "time"]
        assert [s.name for s in reserve.optional_slots()] == ["number_of_seats", "date"]

    def test_spaced_slot_names_with_required_flags(self, tmp_path):
        path = tmp_path / "schema.json"
        path.write_text(
            json.dumps(
                [
                    {
                        "service_name": "Restaurants",
                        "intents": [
                            {
                                "name": "ReserveRestaurant",
                                "required_slots": ["party size", "reservation time"],
                                "optional_slots": {},
                            }
                        ],
                    }
                ]
            ),
            encoding="utf-8",
        )
        catalog = ingest_schemas(path, format="SGD_JSON")
        intent = catalog.get("Restaurants").intent("ReserveRestaurant")
        assert [(s.name, s.is_required) for s in intent.slots] == [
            ("party size", True),
            ("reservation time", True),
        ]

    def test_empty_file_is_empty_schema_error(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("[]", encoding="utf-8")
        with pytest.raises(EmptySchemaError):
            ingest_schemas(path, format="SGD_JSON")

    def test_syntax_error_is_malformed(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(MalformedFileError):
            ingest_schemas(path, format="NATIVE_JSON")

    def test_duplicate_domain_rejected(self, tmp_path):
        path = tmp_path / "dup.json"
        entry = '{"service_name": "X", "intents": [{"name": "A", "required_slots": ["s"]}]}'
        path.write_text(f"[{entry}, {entry}]", encoding="utf-8")
        with pytest.raises(DuplicateDomainError):
            ingest_schemas(path, format="SGD_JSON")

    def test_three_domain_native_round_trips_byte_identically(self, catalog, tmp_path):
        # serialize(parse(file)) must equal the file, byte for byte
        out = tmp_path / "out.json"
        write_schemas(catalog, out)
        original = (FIXTURES / "three_domains_native.json").read_bytes()
        assert out.read_bytes() == original
        assert len(catalog) == 3


class TestDialogs:
    def test_dialog_1_00001_fixture(self, catalog):
        dialogs = ingest_dialogs(FIXTURES / "dialog_1_00001.jsonl", catalog, format="NATIVE_JSONL")
        assert len(dialogs) == 1
        dialog = dialogs[0]
        assert len(dialog.turns) == 7
        call_turn = dialog.turns[2]
        assert call_turn.index == 3
        assert call_turn.system_output.kind is OutputKind.API_CALL
        assert call_turn.system_output.call.method == "ReserveRestaurant"
        assert call_turn.user_utterance == ""

    def test_sgd_service_call_turns_split(self, catalog):
        dialogs = ingest_dialogs(FIXTURES / "sgd_dialogs.json", catalog, format="SGD_JSON")
        booked = dialogs[0]
        kinds = [t.system_output.kind for t in booked.turns]
        assert kinds == [OutputKind.API_CALL, OutputKind.TEXT, OutputKind.TEXT]
        assert booked.turns[0].system_output.call.method == "ReserveRestaurant"
        assert booked.turns[1].user_utterance == ""
        assert booked.turns[1].search_results is not None
        assert "Butterfly" in booked.turns[1].search_results
        assert booked.turns[1].acts == ("NOTIFY_SUCCESS", "REQ_MORE")

    def test_ketod_enriched_utterance_wins(self, catalog):
        dialogs = ingest_dialogs(FIXTURES / "ketod_dialogs.json", catalog, format="KETOD_JSON")
        assert "dim sum" in dialogs[0].turns[1].system_output.text
        # the second dialog has no enrichment and reads as plain SGD
        assert dialogs[1].turns[0].system_output.text.startswith("There is a bus")

    def test_empty_corpus_is_fine(self, catalog, tmp_path):
        path = tmp_path / "none.jsonl"
        path.write_text("", encoding="utf-8")
        assert ingest_dialogs(path, catalog, format="NATIVE_JSONL") == []

    def test_unknown_domain_is_warning_not_error(self, catalog, tmp_path):
        path = tmp_path / "odd.jsonl"
        line = (
            '{"dialog_id": "z1", "domains": ["Spaceships"], "turns": '
            '[{"index": 1, "user": "hi", "output": {"kind": "TEXT", "text": "hello"}, "acts": []}]}'
        )
        path.write_text(line + "\n", encoding="utf-8")
        warnings: list[str] = []
        dialogs = ingest_dialogs(path, catalog, format="NATIVE_JSONL", warnings=warnings)
        assert len(dialogs) == 1
        assert warnings and "Spaceships" in warnings[0]

    def test_native_round_trip_structural_equality(self, catalog, tmp_path):
        source = ingest_dialogs(FIXTURES / "sgd_dialogs.json", catalog, format="SGD_JSON")
        out = tmp_path / "native.jsonl"
        write_dialogs(source, out)
        again = ingest_dialogs(out, catalog, format="NATIVE_JSONL")
        assert again == source

    def test_directory_of_sgd_files(self, catalog, tmp_path):
        import shutil

        shutil.copy(FIXTURES / "sgd_dialogs.json", tmp_path / "dialogues_001.json")
        shutil.copy(FIXTURES / "sgd_schema.json", tmp_path / "schema.json")
        dialogs = ingest_dialogs(tmp_path, catalog, format="SGD_JSON")
        assert [d.dialog_id for d in dialogs] == ["10_00042", "10_00043"]

    def test_ingestion_preserves_turn_order(self, catalog):
        dialogs = ingest_dialogs(FIXTURES / "dialog_1_00001.jsonl", catalog, format="NATIVE_JSONL")
        assert [t.index for t in dialogs[0].turns] == list(range(1, 8))
