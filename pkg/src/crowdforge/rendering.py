"""Instruction rendering: Markdown to sanitized HTML.

The renderer covers the constructs instruction documents actually use
(headings, paragraphs, emphasis, code, lists, blockquotes, links, images,
inline HTML for media embeds); it is not a full CommonMark engine. All
output passes through the sanitizer, which whitelists tags/attributes and
drops anything script-capable, so rendering is total and safe for raw
requester input.
"""

from __future__ import annotations

import html
import re
from html.parser import HTMLParser

ALLOWED_TAGS = {
    "a", "abbr", "audio", "b", "blockquote", "br", "code", "div", "em",
    "figcaption", "figure", "h1", "h2", "h3", "h4", "h5", "h6", "hr", "i",
    "img", "li", "mark", "ol", "p", "pre", "q", "s", "small", "source",
    "span", "strong", "sub", "sup", "table", "tbody", "td", "th", "thead",
    "tr", "u", "ul", "video",
}

ALLOWED_ATTRS = {
    "a": {"href", "title"},
    "audio": {"src", "controls"},
    "img": {"src", "alt", "title", "width", "height"},
    "source": {"src", "type"},
    "video": {"src", "controls", "width", "height", "poster"},
    "td": {"colspan", "rowspan"},
    "th": {"colspan", "rowspan"},
    "*": {"class"},
}

VOID_TAGS = {"br", "hr", "img", "source"}

_SAFE_URL = re.compile(r"^(https?:|mailto:|data:image/|/|#|\.)", re.IGNORECASE)


class _Sanitizer(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.out: list[str] = []
        self._drop_depth = 0  # inside a disallowed element: drop content too?

    def handle_starttag(self, tag, attrs):
        if self._drop_depth:
            if tag in ("script", "style", "iframe", "object", "embed"):
                self._drop_depth += 1
            return
        if tag in ("script", "style", "iframe", "object", "embed"):
            self._drop_depth += 1
            return
        if tag not in ALLOWED_TAGS:
            return  # drop the tag, keep the content
        kept = []
        allowed = ALLOWED_ATTRS.get(tag, set()) | ALLOWED_ATTRS["*"]
        for name, value in attrs:
            name = name.lower()
            if name.startswith("on") or name not in allowed:
                continue
            if name in ("href", "src", "poster"):
                if value is None or not _SAFE_URL.match(value.strip()):
                    continue
            if value is None:
                kept.append(name)
            else:
                kept.append(f'{name}="{html.escape(value, quote=True)}"')
        attr_text = (" " + " ".join(kept)) if kept else ""
        if tag in VOID_TAGS:
            self.out.append(f"<{tag}{attr_text}/>")
        else:
            self.out.append(f"<{tag}{attr_text}>")

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)
        if tag not in VOID_TAGS and tag in ALLOWED_TAGS and not self._drop_depth:
            self.out.append(f"</{tag}>")

    def handle_endtag(self, tag):
        if tag in ("script", "style", "iframe", "object", "embed"):
            if self._drop_depth:
                self._drop_depth -= 1
            return
        if self._drop_depth or tag not in ALLOWED_TAGS:
            return
        if tag in VOID_TAGS:
            return
        self.out.append(f"</{tag}>")

    def handle_data(self, data):
        if not self._drop_depth:
            self.out.append(html.escape(data, quote=False))


def sanitize_html(raw: str) -> str:
    """Drop script-capable elements and event-handler/javascript: attributes."""
    s = _Sanitizer()
    s.feed(raw)
    s.close()
    return "".join(s.out)


# ---------------------------------------------------------------------------
# Markdown


_INLINE_CODE = re.compile(r"`([^`]+)`")
_IMAGE = re.compile(r"!\[([^\]]*)\]\(([^)\s]+)(?:\s+\"([^\"]*)\")?\)")
_LINK = re.compile(r"\[([^\]]+)\]\(([^)\s]+)(?:\s+\"([^\"]*)\")?\)")
_BOLD = re.compile(r"\*\*(.+?)\*\*|__(.+?)__")
_ITALIC = re.compile(r"\*([^*]+)\*|_([^_]+)_")

_PLACEHOLDER = "\x00{}\x00"


def _render_inline(text: str) -> str:
    # protect code spans from emphasis processing
    stash: list[str] = []

    def stash_code(m):
        stash.append(f"<code>{html.escape(m.group(1), quote=False)}</code>")
        return _PLACEHOLDER.format(len(stash) - 1)

    text = _INLINE_CODE.sub(stash_code, text)
    text = _IMAGE.sub(_image_tag, text)
    text = _LINK.sub(_link_tag, text)
    text = _BOLD.sub(lambda m: f"<strong>{m.group(1) or m.group(2)}</strong>", text)
    text = _ITALIC.sub(lambda m: f"<em>{m.group(1) or m.group(2)}</em>", text)
    for i, code in enumerate(stash):
        text = text.replace(_PLACEHOLDER.format(i), code)
    return text


def _image_tag(m) -> str:
    alt, src, title = m.group(1), m.group(2), m.group(3)
    title_attr = f' title="{title}"' if title else ""
    return f'<img src="{src}" alt="{alt}"{title_attr}/>'


def _link_tag(m) -> str:
    label, href, title = m.group(1), m.group(2), m.group(3)
    title_attr = f' title="{title}"' if title else ""
    return f'<a href="{href}"{title_attr}>{label}</a>'


_HEADING = re.compile(r"^(#{1,6})\s+(.*?)\s*#*\s*$")
_ULIST = re.compile(r"^[-*+]\s+(.*)$")
_OLIST = re.compile(r"^\d+[.)]\s+(.*)$")
_HRULE = re.compile(r"^(?:-{3,}|\*{3,}|_{3,})\s*$")


def render_markdown(source: str) -> str:
    """Markdown to HTML (unsanitized); block structure is line-oriented."""
    lines = source.replace("\r\n", "\n").split("\n")
    out: list[str] = []
    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        if line.startswith("```"):
            fence: list[str] = []
            i += 1
            while i < n and not lines[i].startswith("```"):
                fence.append(lines[i])
                i += 1
            i += 1  # closing fence
            code = html.escape("\n".join(fence), quote=False)
            out.append(f"<pre><code>{code}</code></pre>")
            continue
        m = _HEADING.match(line)
        if m:
            level = len(m.group(1))
            out.append(f"<h{level}>{_render_inline(m.group(2))}</h{level}>")
            i += 1
            continue
        if _HRULE.match(line):
            out.append("<hr/>")
            i += 1
            continue
        m = _ULIST.match(line)
        if m:
            items = []
            while i < n and (m := _ULIST.match(lines[i])):
                items.append(f"<li>{_render_inline(m.group(1))}</li>")
                i += 1
            out.append("<ul>" + "".join(items) + "</ul>")
            continue
        m = _OLIST.match(line)
        if m:
            items = []
            while i < n and (m := _OLIST.match(lines[i])):
                items.append(f"<li>{_render_inline(m.group(1))}</li>")
                i += 1
            out.append("<ol>" + "".join(items) + "</ol>")
            continue
        if line.startswith(">"):
            quoted = []
            while i < n and lines[i].startswith(">"):
                quoted.append(lines[i].lstrip("> ").rstrip())
                i += 1
            inner = _render_inline(" ".join(q for q in quoted if q))
            out.append(f"<blockquote><p>{inner}</p></blockquote>")
            continue
        paragraph = [line.strip()]
        i += 1
        while i < n and lines[i].strip() and not _is_block_start(lines[i]):
            paragraph.append(lines[i].strip())
            i += 1
        out.append(f"<p>{_render_inline(' '.join(paragraph))}</p>")
    return "\n".join(out)


def _is_block_start(line: str) -> bool:
    return bool(
        _HEADING.match(line) or _ULIST.match(line) or _OLIST.match(line)
        or _HRULE.match(line) or line.startswith(">") or line.startswith("```")
    )


def render_instruction(markdown: str) -> str:
    """Sanitized HTML for an instruction document. Total: any input
    yields displayable output with script-capable elements stripped."""
    return sanitize_html(render_markdown(markdown))
