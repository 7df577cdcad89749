from __future__ import annotations

import pytest
from hypothesis import given, settings

from semtex.errors import LexError, ParseError
from semtex.syntax import (
    Command,
    Environment,
    Group,
    MathGroup,
    Text,
    TokenKind,
    parse_document,
    parse_keyvals,
    print_ast,
    tokenize,
)
from strategies import documents, token_streams

LISTING_MODULE = r"""\begin{module}[id=reals]
  \importmodule[../background/sets]{sets}
  \symdef{Reals}{\mathbb{R}}
  \symdef{greater}[2]{#1>#2}
  \symdef{positiveReals}{\Reals^+}
  \begin{definition}[id=posreals.def,
   title=Positive Real Numbers]
    $\defeq\positiveReals
             {\setst{\inset{x}\Reals}{\greater{x}0}}$
  \end{definition}
\end{module}
"""


# ── Lexer ───────────────────────────────────────────────────────────


def test_lexing_is_lossless_on_the_module_fixture():
    tokens = tokenize(LISTING_MODULE, "reals.tex")
    assert "".join(t.lexeme for t in tokens) == LISTING_MODULE


@given(token_streams())
@settings(max_examples=150)
def test_lexing_is_lossless_whenever_it_succeeds(source):
    try:
        tokens = tokenize(source)
    except LexError:
        return
    assert "".join(t.lexeme for t in tokens) == source


def test_command_tokens_swallow_following_whitespace():
    tokens = tokenize("\\Reals  ^+")
    assert tokens[0].kind is TokenKind.COMMAND
    assert tokens[0].lexeme == "\\Reals  "
    assert tokens[0].name == "Reals"
    assert tokens[1].kind is TokenKind.SUPERSCRIPT


def test_parameter_tokens():
    tokens = tokenize("#1>#2")
    assert [t.kind for t in tokens] == [
        TokenKind.PARAMETER,
        TokenKind.TEXT,
        TokenKind.PARAMETER,
    ]
    assert tokens[0].param_index == 1
    assert tokens[2].param_index == 2


def test_parameter_zero_is_rejected():
    with pytest.raises(LexError):
        tokenize("#0")


def test_hash_before_letter_is_plain_text():
    tokens = tokenize("a#frag")
    assert "".join(t.lexeme for t in tokens) == "a#frag"
    assert all(t.kind is TokenKind.TEXT for t in tokens)


def test_comments_extend_to_end_of_line():
    tokens = tokenize("a% remark\nb")
    assert [t.kind for t in tokens] == [TokenKind.TEXT, TokenKind.COMMENT, TokenKind.TEXT]
    assert tokens[1].lexeme == "% remark\n"


def test_lone_backslash_is_a_lex_error():
    with pytest.raises(LexError):
        tokenize("oops\\")


# ── Parser ──────────────────────────────────────────────────────────


def test_symdef_shape_from_the_module_listing():
    ast = parse_document(r"\symdef{Reals}{\mathbb{R}}")
    (cmd,) = ast.nodes
    assert isinstance(cmd, Command)
    assert cmd.name == "symdef"
    assert cmd.args[0].text_content() == "Reals"
    assert isinstance(cmd.args[1].children[0], Command)


def test_symdef_with_arity_bracket():
    ast = parse_document(r"\symdef{greater}[2]{#1>#2}")
    (cmd,) = ast.nodes
    assert list(cmd.opts) == [("2", None)]
    assert len(cmd.args) == 2


def test_empty_document():
    assert parse_document("") == parse_document("")
    assert parse_document("").nodes == ()


def test_unknown_commands_stay_opaque():
    ast = parse_document(r"\ldots{x}")
    assert isinstance(ast.nodes[0], Command)
    assert ast.nodes[0].name == "ldots"
    assert ast.nodes[0].args == ()
    assert isinstance(ast.nodes[1], Group)


def test_environment_parsing_and_mismatch():
    ast = parse_document("\\begin{module}[id=m]x\\end{module}")
    (env,) = ast.nodes
    assert isinstance(env, Environment)
    assert env.opts.get("id") == "m"
    with pytest.raises(ParseError) as err:
        parse_document("\\begin{module}x\\end{definition}")
    assert "closed by" in str(err.value)


def test_parse_errors_carry_spans_inside_the_input():
    cases = ["{unbalanced", "unbalanced}", "$x", "\\begin{module}x", "\\end{module}"]
    for source in cases:
        with pytest.raises(ParseError) as err:
            parse_document(source, "case.tex")
        span = err.value.span
        assert span is not None
        assert span.origin == "case.tex"
        assert 0 <= span.start <= len(source)
        assert 0 <= span.end <= len(source) + 1


def test_comments_are_dropped_from_the_ast_but_text_joins():
    ast = parse_document("abc% note\nxyz")
    assert ast.nodes == (Text("abcxyz"),)


def test_math_group_keeps_raw_tokens():
    ast = parse_document(r"$\greater{x}0$")
    (math,) = ast.nodes
    assert isinstance(math, MathGroup)
    assert math.source() == r"\greater{x}0"


def test_unbalanced_braces_inside_math():
    with pytest.raises(ParseError):
        parse_document("${x$")


# ── KeyVals ─────────────────────────────────────────────────────────


def test_keyvals_from_the_definition_listing():
    kv = parse_keyvals("id=posreals.def,title=Positive Real Numbers")
    assert list(kv) == [("id", "posreals.def"), ("title", "Positive Real Numbers")]


def test_keyvals_empty():
    assert list(parse_keyvals("")) == []
    assert not parse_keyvals("")


def test_keyvals_math_value():
    kv = parse_keyvals(r"hasState=$\statedocrd{\tuev}$")
    value = kv.get("hasState")
    assert isinstance(value, MathGroup)
    assert value.source() == r"\statedocrd{\tuev}"


def test_keyvals_braces_protect_commas_and_equals():
    kv = parse_keyvals("title={a,b=c},for=x")
    assert kv.get("title") == "a,b=c"
    assert kv.get("for") == "x"


def test_keyvals_bare_keys_and_order():
    kv = parse_keyvals("link,env=document")
    assert list(kv) == [("link", None), ("env", "document")]


def test_keyvals_duplicate_key_is_an_error():
    with pytest.raises(ParseError):
        parse_keyvals("a=1,a=2")


def test_keyvals_unterminated_math_value():
    with pytest.raises(ParseError):
        parse_keyvals("k=$x")


def test_keyvals_values_are_trimmed():
    kv = parse_keyvals("id= posreals.def , title= T ")
    assert kv.get("id") == "posreals.def"
    assert kv.get("title") == "T"


def test_duplicate_key_in_command_options_has_a_span():
    with pytest.raises(ParseError) as err:
        parse_document(r"\importmodule[p,p]{x}", "f.tex")
    assert err.value.span is not None


# ── Printer ─────────────────────────────────────────────────────────


def test_print_of_the_module_listing_reparses_equal():
    ast = parse_document(LISTING_MODULE, "reals.tex")
    assert parse_document(print_ast(ast)) == ast


def test_print_empty_ast():
    assert print_ast(parse_document("")) == ""


def test_printer_separates_bare_commands_from_text():
    ast = parse_document(print_ast(parse_document(r"\ldots abc")))
    assert ast == parse_document(r"\ldots abc")


@given(documents())
@settings(max_examples=120, deadline=None)
def test_parse_print_round_trip(ast):
    printed = print_ast(ast)
    assert parse_document(printed) == ast
