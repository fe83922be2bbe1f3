"""
This module parses the ``key = value`` text format of scenario files into
ScenarioConfig objects
"""
import pyparsing as pp

from .config import ConfigError, build_config


def _grammar():

    LPAR, RPAR, COMMA, EQUAL = map(pp.Suppress, "(),=")
    key = pp.Word(pp.alphas, pp.alphanums + '_.')
    number = pp.pyparsing_common.number()
    boolean = (pp.CaselessKeyword('true') | pp.CaselessKeyword('false'))
    boolean.setParseAction(lambda t: t[0].lower() == 'true')
    string = pp.QuotedString('"') | pp.QuotedString("'")
    word = pp.Word(pp.alphas, pp.alphanums + '_.+-')

    point = LPAR + pp.delimitedList(number, ",") + RPAR
    # keep tuples and lists as single tokens
    point.setParseAction(lambda t: [tuple(t)])
    number_list = number + pp.OneOrMore(COMMA + number)
    number_list.setParseAction(lambda t: [list(t)])

    value = boolean | point | number_list | number | string | word
    line = key + EQUAL + value
    line.ignore(pp.pythonStyleComment)
    return line


_LINE = _grammar()


def to_pairs(text):
    """
    Translate scenario text into a list of ``(key, value)`` tuples

    Parameters
    ----------
    text: str
        Newline separated ``key = value`` entries; ``#`` starts a comment and
        blank lines are ignored
    """
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith('#'):
            continue
        try:
            key, value = _LINE.parseString(stripped, parseAll=True)
        except pp.ParseException as e:
            name = stripped.split('=', 1)[0].strip() or None
            raise ConfigError(name, 'line {}: malformed entry {!r} ({})'
                              .format(lineno, stripped, e.msg))
        pairs.append((key, value))
    return pairs


def parse_config(text):
    """
    Build a validated ScenarioConfig from scenario text; keys not present
    keep their defaults

    Raises
    ------
    ConfigError
        Unknown key, malformed value or inconsistent combination
    """
    return build_config(to_pairs(text))


def load_config(path):
    with open(path, encoding='utf-8') as fh:
        return parse_config(fh.read())
