from trovebench.lexing import called_names, tokenize_source


def test_simple_assignment_tokens():
    assert tokenize_source("answer = 1") == ["answer", "=", "1"]


def test_empty_source():
    assert tokenize_source("") == []


def test_comment_is_dropped():
    assert tokenize_source("answer = 1  # comment") == ["answer", "=", "1"]


def test_string_literal_is_one_token():
    assert tokenize_source("answer = 'a b c'") == ["answer", "=", "'a b c'"]
    assert len(tokenize_source('x = """multi\nline"""')) == 3


def test_hash_inside_string_is_not_a_comment():
    assert tokenize_source("s = '#nope'") == ["s", "=", "'#nope'"]


def test_multichar_operators():
    assert tokenize_source("a **= 2 ** 3 // 4 != 5") == ["a", "**=", "2", "**", "3", "//", "4", "!=", "5"]


def test_called_names_basic():
    assert called_names("answer = is_prime(7)") == {"is_prime"}


def test_called_names_excludes_definitions():
    source = "def is_prime(num):\n    return True\n\nx = range(3)"
    assert called_names(source) == {"range"}


def test_called_names_requires_call_syntax():
    # A bare reference (e.g. passed as a value) is not a call.
    assert called_names("f = is_prime") == set()
    assert called_names("count_up_to(30, is_prime)") == {"count_up_to"}
