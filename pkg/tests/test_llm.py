import json

import pytest
from hypothesis import given, strategies as st

from comdb import fixtures as bundled
from comdb.errors import (
    ApiError,
    ConfigError,
    MissingAnnotations,
    MissingCredentials,
    NoMappingFound,
    NoSqlFound,
    Timeout,
    TransportError,
)
from comdb.llm import (
    DEFAULT_JOIN_GOAL,
    TASK_INTEGRATION,
    TASK_JOINING,
    WITH_CONTEXT,
    WITHOUT_CONTEXT,
    ClientConfig,
    HttpChatClient,
    LLMResponse,
    MockChatClient,
    build_integration_prompt,
    build_join_prompt,
    extract_sql,
    parse_mapping_response,
)


def resp(text):
    return LLMResponse(text, 0.0, "test")


# --- prompt building ---

def test_integration_prompt_with_context(patient_tables, patient_annotations):
    table_a, table_b = patient_tables
    bundle = build_integration_prompt(table_a, table_b, patient_annotations,
                                      WITH_CONTEXT)
    text = bundle.user_text
    assert ("In table 'patients_A', headers Name and Surname are in the "
            "context of patients' name.") in text
    assert ("In table 'patients_B', headers ADDRESS, CITY, STATE, and COUNTY "
            "are in the context of patients' address.") in text
    assert ("Identify the headers from table 'patients_A' and table "
            "'patients_B' which contain the same information. Some headers "
            "may need to be combined or split.") in text
    assert bundle.task == TASK_INTEGRATION
    assert bundle.format_directive in text


def test_integration_prompt_without_context(patient_tables, patient_annotations):
    table_a, table_b = patient_tables
    bundle = build_integration_prompt(table_a, table_b, None, WITHOUT_CONTEXT)
    text = bundle.user_text
    assert "context of" not in text
    assert "Given a table 'patients_A' with headers: Id_patients, Name," in text
    assert "And a table 'patients_B' with headers: Id, BIRTHDATE," in text
    assert "combined or split" in text


def test_integration_prompt_requires_annotations(patient_tables):
    table_a, table_b = patient_tables
    with pytest.raises(MissingAnnotations):
        build_integration_prompt(table_a, table_b, None, WITH_CONTEXT)


def test_exactly_one_user_message(patient_tables, patient_annotations):
    table_a, table_b = patient_tables
    bundle = build_integration_prompt(table_a, table_b, patient_annotations,
                                      WITH_CONTEXT)
    assert [m.role for m in bundle.messages] == ["user"]
    bundle = build_integration_prompt(table_a, table_b, patient_annotations,
                                      WITH_CONTEXT, system="Be terse.")
    assert [m.role for m in bundle.messages] == ["system", "user"]


def test_join_prompt_with_context(synthea_schema, synthea_annotations):
    bundle = build_join_prompt(synthea_schema, synthea_annotations,
                               arm=WITH_CONTEXT)
    text = bundle.user_text
    assert ("encounters are in the context of patients, organizations, "
            "providers, payers.") in text
    assert text.startswith("Given a table 'allergies'")
    assert DEFAULT_JOIN_GOAL in text
    assert bundle.task == TASK_JOINING


def test_join_prompt_without_context(synthea_schema):
    bundle = build_join_prompt(synthea_schema, None, arm=WITHOUT_CONTEXT)
    text = bundle.user_text
    assert "context of" not in text
    # all 14 base lines, plus goal and directive
    assert text.count("a table '") == 14


def test_join_prompt_empty_goal(synthea_schema, synthea_annotations):
    with pytest.raises(ConfigError):
        build_join_prompt(synthea_schema, synthea_annotations, goal="  ",
                          arm=WITH_CONTEXT)


def test_prompt_determinism(synthea_schema, synthea_annotations):
    a = build_join_prompt(synthea_schema, synthea_annotations, arm=WITH_CONTEXT)
    b = build_join_prompt(synthea_schema, synthea_annotations, arm=WITH_CONTEXT)
    assert a == b
    assert a.user_text == b.user_text


def test_arm_discipline(patient_tables, patient_annotations, synthea_schema,
                        synthea_annotations):
    table_a, table_b = patient_tables
    without = [
        build_integration_prompt(table_a, table_b, None, WITHOUT_CONTEXT),
        build_join_prompt(synthea_schema, None, arm=WITHOUT_CONTEXT),
    ]
    withc = [
        build_integration_prompt(table_a, table_b, patient_annotations,
                                 WITH_CONTEXT),
        build_join_prompt(synthea_schema, synthea_annotations, arm=WITH_CONTEXT),
    ]
    for bundle in without:
        assert bundle.user_text.count("context of") == 0
    for bundle in withc:
        assert bundle.user_text.count("context of") >= 1


# --- HTTP client ---

def _ok_transport(content="hello"):
    body = json.dumps({"choices": [{"message": {"content": content}}]})

    def transport(url, payload, headers, timeout):
        transport.calls.append((url, payload, headers, timeout))
        return 200, body

    transport.calls = []
    return transport


def make_config(**kw):
    defaults = dict(endpoint_url="http://llm.example", model="m",
                    api_key_source="TEST_LLM_KEY")
    defaults.update(kw)
    return ClientConfig(**defaults)


@pytest.fixture()
def api_key(monkeypatch):
    monkeypatch.setenv("TEST_LLM_KEY", "sk-test")


def simple_bundle(patient_tables):
    table_a, table_b = patient_tables
    return build_integration_prompt(table_a, table_b, None, WITHOUT_CONTEXT)


def test_http_client_success(patient_tables, api_key):
    transport = _ok_transport("the answer")
    client = HttpChatClient(make_config(), transport=transport)
    result = client.complete(simple_bundle(patient_tables))
    assert result.raw_text == "the answer"
    assert result.latency_ms >= 0
    url, payload, headers, timeout = transport.calls[0]
    assert url == "http://llm.example/chat/completions"
    assert payload["model"] == "m"
    assert payload["temperature"] == 0.0
    assert payload["messages"][0]["role"] == "user"
    assert headers["Authorization"] == "Bearer sk-test"
    assert timeout == 30.0


def test_http_client_missing_credentials(patient_tables, monkeypatch):
    monkeypatch.delenv("TEST_LLM_KEY", raising=False)
    client = HttpChatClient(make_config(), transport=_ok_transport())
    with pytest.raises(MissingCredentials):
        client.complete(simple_bundle(patient_tables))


def test_http_client_api_error(patient_tables, api_key):
    def transport(url, payload, headers, timeout):
        return 401, "unauthorized"

    client = HttpChatClient(make_config(), transport=transport)
    with pytest.raises(ApiError) as excinfo:
        client.complete(simple_bundle(patient_tables))
    assert excinfo.value.status == 401
    assert "unauthorized" in excinfo.value.body


def test_http_client_retries_then_fails(patient_tables, api_key, monkeypatch):
    monkeypatch.setattr("comdb.llm.time.sleep", lambda s: None)
    attempts = []

    def transport(url, payload, headers, timeout):
        attempts.append(1)
        raise TransportError("connection refused")

    client = HttpChatClient(make_config(max_retries=2), transport=transport)
    with pytest.raises(TransportError):
        client.complete(simple_bundle(patient_tables))
    assert len(attempts) == 3


def test_http_client_retry_then_success(patient_tables, api_key, monkeypatch):
    monkeypatch.setattr("comdb.llm.time.sleep", lambda s: None)
    ok = _ok_transport("late but fine")
    attempts = []

    def transport(url, payload, headers, timeout):
        attempts.append(1)
        if len(attempts) < 3:
            raise Timeout(1.0)
        return ok(url, payload, headers, timeout)

    client = HttpChatClient(make_config(max_retries=3), transport=transport)
    assert client.complete(simple_bundle(patient_tables)).raw_text == "late but fine"
    assert len(attempts) == 3


def test_http_client_malformed_body(patient_tables, api_key):
    def transport(url, payload, headers, timeout):
        return 200, "not json"

    client = HttpChatClient(make_config(), transport=transport)
    with pytest.raises(ApiError):
        client.complete(simple_bundle(patient_tables))


def test_client_config_validation():
    with pytest.raises(ConfigError):
        make_config(timeout=0)
    with pytest.raises(ConfigError):
        make_config(temperature=-1)
    with pytest.raises(ConfigError):
        make_config(max_retries=-1)


# --- mock client ---

def test_mock_client_passthrough(patient_tables):
    client = MockChatClient([
        {"task": TASK_INTEGRATION, "arm": WITHOUT_CONTEXT, "response": "canned"},
    ])
    result = client.complete(simple_bundle(patient_tables), repetition=7)
    assert result.raw_text == "canned"
    assert result.client_id == "mock"


def test_mock_client_exact_beats_wildcard(patient_tables):
    client = MockChatClient([
        {"task": TASK_INTEGRATION, "arm": WITHOUT_CONTEXT, "response": "default"},
        {"task": TASK_INTEGRATION, "arm": WITHOUT_CONTEXT, "repetition": 2,
         "response": "special"},
    ])
    bundle = simple_bundle(patient_tables)
    assert client.complete(bundle, repetition=0).raw_text == "default"
    assert client.complete(bundle, repetition=2).raw_text == "special"


def test_mock_client_missing_entry(patient_tables):
    client = MockChatClient([])
    with pytest.raises(ConfigError):
        client.complete(simple_bundle(patient_tables))


def test_mock_client_from_file():
    client = MockChatClient.from_file(
        bundled.fixture_path(bundled.INTEGRATION_MOCK))
    assert isinstance(client, MockChatClient)


def test_mock_client_bad_records():
    with pytest.raises(ConfigError):
        MockChatClient([{"task": TASK_INTEGRATION}])


# --- mapping response parsing ---

def test_parse_fenced_mapping(patient_tables):
    table_a, table_b = patient_tables
    text = ("Here is the mapping:\n```\n"
            "Name -> FIRST\n"
            "Surname -> LAST\n"
            "Date of Birth -> BIRTHDATE\n"
            "Place of Birth -> BIRTHPLACE\n"
            "Address -> ADDRESS + CITY + STATE + COUNTY\n"
            "Gender -> GENDER\n"
            "```\nDone.")
    mapping = parse_mapping_response(resp(text), table_a, table_b)
    assert len(mapping.entries) == 6
    address = next(e for e in mapping.entries if e.source_headers == ("Address",))
    assert set(address.target_headers) == {"ADDRESS", "CITY", "STATE", "COUNTY"}
    assert mapping.source_table == "patients_A"
    assert not mapping.warnings


def test_parse_fenced_mapping_case_insensitive(patient_tables):
    table_a, table_b = patient_tables
    text = "```\ngender -> gender\n```"
    mapping = parse_mapping_response(resp(text), table_a, table_b)
    # resolves to the canonical spellings of each table
    assert mapping.entries[0].source_headers == ("Gender",)
    assert mapping.entries[0].target_headers == ("GENDER",)


def test_parse_mapping_freeform_fallback(patient_tables):
    table_a, table_b = patient_tables
    text = "Date of Birth corresponds to BIRTHDATE"
    mapping = parse_mapping_response(resp(text), table_a, table_b)
    assert len(mapping.entries) == 1
    assert mapping.entries[0].source_headers == ("Date of Birth",)
    assert mapping.entries[0].target_headers == ("BIRTHDATE",)


def test_parse_mapping_freeform_multi_target(patient_tables):
    table_a, table_b = patient_tables
    text = "Address corresponds to ADDRESS, CITY, STATE, and COUNTY."
    mapping = parse_mapping_response(resp(text), table_a, table_b)
    assert set(mapping.entries[0].target_headers) == \
        {"ADDRESS", "CITY", "STATE", "COUNTY"}


def test_parse_mapping_nothing_found(patient_tables):
    table_a, table_b = patient_tables
    with pytest.raises(NoMappingFound):
        parse_mapping_response(resp("I cannot help with that."), table_a, table_b)


def test_parse_mapping_unresolvable_collected(patient_tables):
    table_a, table_b = patient_tables
    text = "```\nGender -> GENDER\nShoe Size -> SSN\n```"
    mapping = parse_mapping_response(resp(text), table_a, table_b)
    assert len(mapping.entries) == 1
    assert any("Shoe Size" in w for w in mapping.warnings)


def test_parse_mapping_duplicate_source_dropped(patient_tables):
    table_a, table_b = patient_tables
    text = "```\nGender -> GENDER\nGender -> SSN\n```"
    mapping = parse_mapping_response(resp(text), table_a, table_b)
    assert len(mapping.entries) == 1
    assert mapping.entries[0].target_headers == ("GENDER",)
    assert mapping.warnings


@given(st.text(max_size=300))
def test_parse_mapping_total(patient_tables, text):
    table_a, table_b = patient_tables
    try:
        mapping = parse_mapping_response(resp(text), table_a, table_b)
        assert mapping.entries
    except NoMappingFound:
        pass


# --- SQL extraction ---

def test_extract_sql_fenced():
    text = "Sure:\n```sql\nSELECT 1;\n```\nand maybe\n```\nSELECT 2;\n```"
    assert extract_sql(resp(text)) == "SELECT 1;"


def test_extract_sql_bare_select():
    text = "You could run SELECT a FROM t WHERE x = 1; to get the rows."
    assert extract_sql(resp(text)) == "SELECT a FROM t WHERE x = 1;"


def test_extract_sql_lowercase_no_semicolon():
    assert extract_sql(resp("try select * from t")) == "select * from t"


def test_extract_sql_none():
    with pytest.raises(NoSqlFound):
        extract_sql(resp("No query here."))


@given(st.text(max_size=300))
def test_extract_sql_total(text):
    try:
        sql = extract_sql(resp(text))
        assert sql.strip()
    except NoSqlFound:
        pass
