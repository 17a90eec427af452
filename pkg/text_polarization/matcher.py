import re

WORD_RE = re.compile(r"\w+")
HASHTAG_RE = re.compile(r"#(\w+)")


def split_words(text: str) -> [str]:
    """
    Lowercase the text and split it to words on word boundaries.
    Whitespace and punctuation are both boundaries, so "9/11" -> ['9', '11']
    and "#SandyHook" -> ['sandyhook'].
    """
    return WORD_RE.findall(text.lower())


def hashtag_bodies(text: str) -> [str]:
    return HASHTAG_RE.findall(text.lower())


class KeywordMatcher:
    """
    Trie of keywords over words. A keyword matches a text when its words
    occur contiguously in the text, or when the keyword with its spaces
    removed occurs inside a hashtag ("#LasVegasShooting" contains "vegas").
    """

    class KeywordNode(object):
        __slots__ = 'children', 'content'

        def __init__(self):
            self.children = {}
            self.content = None

    def __init__(self, keywords: dict = None):
        """
        :param keywords: dict - optional mapping value -> [keyword]
        """
        self._root = self.KeywordNode()
        self._compact = {}
        if keywords:
            for value, kws in keywords.items():
                if isinstance(kws, str):
                    kws = [kws]
                for keyword in kws:
                    self.set_keyword(keyword, value)

    def set_keyword(self, keyword: str, value):
        words = split_words(keyword)
        if not words:
            raise ValueError(f"The keyword '{keyword}' has no words.")
        node = self._root
        for sym in words:
            node = node.children.setdefault(sym, self.KeywordNode())
        node.content = value
        self._compact[''.join(words)] = value

    def matches(self, text: str) -> list:
        """
        Return values of all keywords found in the text, each once,
        in order of their first occurrence.
        :param text: str
        :return: [value]
        """
        words = split_words(text)
        res = []

        def __rec(node, i):
            if node.content is not None and node.content not in res:
                res.append(node.content)
            if i < len(words) and words[i] in node.children:
                __rec(node.children[words[i]], i + 1)

        for start in range(len(words)):
            child = self._root.children.get(words[start])
            if child is not None:
                __rec(child, start + 1)
        for body in hashtag_bodies(text):
            for compact, value in self._compact.items():
                if compact in body and value not in res:
                    res.append(value)
        return res

    def match(self, text: str, default=None):
        res = self.matches(text)
        if res:
            return res[0]
        return default
