import pytest

from cise.tokens import TokenError, TokenSystem, parse_tokens

VALID = [
    "token enroll t1",
    "token enroll t1\ntoken remCourse t2\nt1 conflicts t2",
    "token enroll t1; token remCourse t2; t1 conflicts t2",
    "token enroll t1 t2 t3",
    "token enroll t1 t2\nt1 conflicts t2",
    "token enroll t1\nt1 conflicts t1",
    "argtoken enroll course t1",
    "argtoken enroll course t1\nargtoken remCourse course t2\nt1 conflicts t2",
    "argtoken remCourse course t1\nt1 conflicts t1",
    "argtoken enroll student t1\nargtoken enroll course t2\nt1 conflicts t2",
    "token addCourse a\nargtoken enroll course b\na conflicts b",
    "(* coarse *)\ntoken enroll t1\ntoken remCourse t2\nt1 conflicts t2",
    "token enroll t1 (* trailing *)\n",
    "\n\n   token enroll t1\n\n",
    "(* outer (* nested *) still comment *) token enroll t1",
    "token enroll t1\ntoken remCourse t2\nt1 conflicts t2\nt2 conflicts t1",
    "token enroll t1\ntoken remCourse t2\ntoken addCourse t3\nt1 conflicts t2\nt3 conflicts t2",
    "token enroll tok_1\ntoken remCourse Tok2\ntok_1 conflicts Tok2",
    "token enroll t1;;token remCourse t2;t1 conflicts t2;",
    "\ttoken\tenroll\tt1\n\tt1\tconflicts\tt1",
    "token addStudent s\nargtoken addCourse course c\ns conflicts c\nc conflicts c",
    "token enroll t1\ntoken enroll t2\nt1 conflicts t2",
]

INVALID = [
    ("", "syntax"),
    ("(* only a comment *)", "syntax"),
    ("token", "syntax"),
    ("token enroll", "syntax"),
    ("token enrol t1", "unknown-operation"),
    ("argtoken enrol course t1\nargtoken remCourse course t2\nt1 conflicts t2", "unknown-operation"),
    ("argtoken enroll t1", "syntax"),
    ("argtoken enroll course", "syntax"),
    ("argtoken enroll course t1 t2", "syntax"),
    ("argtoken enroll grade t1", "unknown-argument"),
    ("argtoken nosuch course t1", "unknown-operation"),
    ("token enroll t1\ntoken remCourse t1", "duplicate-token"),
    ("token enroll t1 t1", "duplicate-token"),
    ("token enroll t1\nargtoken remCourse course t1", "duplicate-token"),
    ("token enroll t1\nt1 conflicts t9", "undeclared-token"),
    ("t1 conflicts t2\ntoken enroll t1\ntoken remCourse t2", "use-before-declaration"),
    ("token enroll t1\nt1 conflicts t1\ntoken remCourse t2", "syntax"),
    ("token enroll t1\nt1 conflict t1", "syntax"),
    ("token enroll t1\nt1 conflicts", "syntax"),
    ("token enroll t-1", "syntax"),
    ("token enroll 1t", "syntax"),
    ("token enroll conflicts", "syntax"),
    ("token enroll t1 (* unterminated", "syntax"),
    ("tokens enroll t1", "syntax"),
]


def test_suite_sizes():
    assert len(VALID) >= 20
    assert len(INVALID) >= 15


@pytest.mark.parametrize("text", VALID)
def test_valid_token_files(text, school):
    ts = parse_tokens(text, school, "t.tok")
    assert isinstance(ts, TokenSystem)
    # round trip through the canonical printer
    assert parse_tokens(ts.format(), school) == ts


@pytest.mark.parametrize("text,kind", INVALID)
def test_invalid_token_files(text, kind, school):
    with pytest.raises(TokenError) as info:
        parse_tokens(text, school, "bad.tok")
    assert info.value.kind == kind
    assert info.value.span is not None
    assert info.value.span.file == "bad.tok"


def test_error_span_points_at_word(school):
    with pytest.raises(TokenError) as info:
        parse_tokens("token enroll t1\ntoken enrol t2\n", school, "x.tok")
    span = info.value.span
    assert (span.line, span.column, span.length) == (2, 7, 5)


def test_conflicts_are_symmetric(school):
    ts = parse_tokens("token enroll t1\ntoken remCourse t2\nt1 conflicts t2", school)
    assert ts.conflicting("t1", "t2") and ts.conflicting("t2", "t1")
    assert not ts.conflicting("t1", "t1")


def test_op_level_exclusion(school):
    ts = parse_tokens("token enroll t1\ntoken remCourse t2\nt1 conflicts t2", school)
    assert ts.ops_exclusive("enroll", "remCourse")
    assert ts.ops_exclusive("remCourse", "enroll")
    assert not ts.ops_exclusive("enroll", "enroll")
    assert not ts.ops_exclusive("addCourse", "remCourse")


def test_op_token_against_argtoken_is_exclusive(school):
    ts = parse_tokens("token addCourse a\nargtoken enroll course b\na conflicts b", school)
    assert ts.ops_exclusive("addCourse", "enroll")
    assert ts.arg_conflicts("addCourse", "enroll") == []


def test_argtoken_conflicts(school):
    ts = parse_tokens("argtoken enroll course t1\nargtoken remCourse course t2\nt1 conflicts t2",
                      school)
    assert not ts.ops_exclusive("enroll", "remCourse")
    assert ts.arg_conflicts("enroll", "remCourse") == [("course", "course")]
    assert ts.arg_conflicts("remCourse", "enroll") == [("course", "course")]
    assert ts.arg_conflicts("enroll", "enroll") == []


def test_shipped_token_fixtures(school):
    from conftest import load_tokens
    coarse = load_tokens("coarse.tok", school)
    assert coarse.ops_exclusive("enroll", "remCourse")
    assert coarse.ops_exclusive("addCourse", "remCourse")
    assert not coarse.ops_exclusive("remCourse", "remCourse")
    assert load_tokens("coarse_mutex.tok", school).ops_exclusive("remCourse", "remCourse")
    refined = load_tokens("refined.tok", school)
    assert refined.arg_conflicts("enroll", "remCourse") == [("course", "course")]
