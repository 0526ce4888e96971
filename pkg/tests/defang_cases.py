"""Constructive defang fixture: 200 (defanged sentence, plain sentence) pairs.

Each case starts from the plain rendering and applies test-local string
surgery per form, so the expected output is known by construction and does
not depend on the code under test.
"""
from __future__ import annotations

FORMS = (
    "space_dot",
    "bracket_dot",
    "paren_dot",
    "brace_dot",
    "backslash_dot",
    "hxxp_lower",
    "hXXp_mixed",
    "bracket_colon",
    "bracket_slash",
)

_DOT_RENDERINGS = {
    "bracket_dot": "[.]",
    "paren_dot": "(.)",
    "brace_dot": "{.}",
    "backslash_dot": "\\.",
}

_HOSTS = (
    "evil.com",
    "login.secure-pay.top",
    "a.b.example.xyz",
    "brand-alerts.co.uk",
    "phish.example.org",
)


def _defang_host(host: str, form: str) -> str:
    if form == "space_dot":
        head, _, tail = host.rpartition(".")
        return f"{head} .{tail}"
    if form in _DOT_RENDERINGS:
        return host.replace(".", _DOT_RENDERINGS[form])
    if form == "spaced_bracket":
        return host.replace(".", " [.] ")
    raise ValueError(form)


def _defang_url(host: str, form: str, path: str = "/a") -> tuple[str, str]:
    """(defanged url, plain url)."""
    plain = f"http://{host}{path}"
    if form == "hxxp_lower":
        return f"hxxp://{host}{path}", plain
    if form == "hXXp_mixed":
        return f"hXXp://{host}{path}", plain
    if form == "bracket_colon":
        return f"http[:]//{host}{path}", plain
    if form == "bracket_slash":
        return f"http://{host}[/]", f"http://{host}"
    return f"http://{_defang_host(host, form)}{path}", plain


def build_cases() -> list[tuple[str, str]]:
    cases: list[tuple[str, str]] = []

    def sentence(defanged: str, plain: str, template: str = "see {} now") -> None:
        cases.append((template.format(defanged), template.format(plain)))

    # Every form, every host, embedded in an English sentence.
    for form in FORMS:
        for host in _HOSTS:
            if form in ("hxxp_lower", "hXXp_mixed", "bracket_colon", "bracket_slash"):
                defanged, plain = _defang_url(host, form)
            else:
                defanged, plain = _defang_host(host, form), host
            sentence(defanged, plain)

    # Dot forms applied to full URLs.
    for form in ("space_dot", "bracket_dot", "paren_dot", "brace_dot", "backslash_dot"):
        for host in _HOSTS:
            defanged, plain = _defang_url(host, form)
            sentence(defanged, plain, template="reported {} to the registrar")

    # Defanged scheme variants with https.
    for host in _HOSTS:
        sentence(f"hxxps://{host}/x", f"https://{host}/x")
        sentence(f"hXXps://{host}/x", f"https://{host}/x")

    # Nested forms: scheme and dot defangs together.
    for host in _HOSTS:
        dotted = _defang_host(host, "bracket_dot")
        sentence(f"hxxp://{dotted}/q", f"http://{host}/q")
        sentence(f"hXXp://{_defang_host(host, 'paren_dot')}/q", f"http://{host}/q")
        sentence(f"http[:]//{dotted}/q", f"http://{host}/q")
        sentence(f"hxxps://{dotted}[/]", f"https://{host}", template="{} flagged")
        sentence(_defang_host(host, "spaced_bracket"), host, template="watch {} today")

    # Japanese sentences with full-width dots and mixed defangs.
    for host in _HOSTS:
        fw = host.replace(".", "．")
        cases.append((f"偽サイト {fw} に注意", f"偽サイト {host} に注意"))
        cases.append((f"hxxps://{fw}/login を開かないで", f"https://{host}/login を開かないで"))
        cases.append(
            (f"このリンク {_defang_host(host, 'bracket_dot')} は詐欺です",
             f"このリンク {host} は詐欺です")
        )

    # Plain controls: no defang pattern, text must come back unchanged.
    for host in _HOSTS:
        cases.append((f"legit link https://{host}/ok fine", f"legit link https://{host}/ok fine"))
        cases.append((f"just prose about {host} nothing odd", f"just prose about {host} nothing odd"))

    # Trailing [/] at end of text (no following whitespace).
    for host in _HOSTS:
        cases.append((f"bad: http://{host}[/]", f"bad: http://{host}"))

    # Multiple indicators per sentence.
    for host in _HOSTS[:5]:
        other = _HOSTS[(_HOSTS.index(host) + 1) % len(_HOSTS)]
        cases.append(
            (
                f"both {_defang_host(host, 'bracket_dot')} and hxxp://{other}/z here",
                f"both {host} and http://{other}/z here",
            )
        )

    # Space on both sides of the dot ("example . com").
    for host in _HOSTS:
        head, _, tail = host.rpartition(".")
        cases.append((f"goto {head} . {tail} asap", f"goto {host} asap"))

    # Ports and queries survive dot-defanged URLs.
    for host in _HOSTS:
        dotted = _defang_host(host, "bracket_dot")
        cases.append(
            (f"hit http://{dotted}:8443/x?q=1 later", f"hit http://{host}:8443/x?q=1 later")
        )

    # Inner-space paren and brace renderings.
    for host in _HOSTS:
        cases.append((f"c2 at {host.replace('.', '( . )')} node", f"c2 at {host} node"))
        cases.append((f"c2 at {host.replace('.', '{ . }')} node", f"c2 at {host} node"))

    # Scheme defang stacked on the colon defang.
    for host in _HOSTS:
        cases.append((f"hxxp[:]//{host}/mix", f"http://{host}/mix"))

    # Multiple backslashes before the dot collapse to one dot.
    for host in _HOSTS:
        cases.append((f"dropper {host.replace('.', chr(92) * 2 + '.')}", f"dropper {host}"))

    # Full-width dots inside a defanged URL.
    for host in _HOSTS:
        fw = host.replace(".", "．")
        cases.append((f"hxxp://{fw}/jp", f"http://{host}/jp"))

    # Japanese space-dot rendering.
    for host in _HOSTS:
        head, _, tail = host.rpartition(".")
        cases.append((f"危険なサイト {head} .{tail} を共有します", f"危険なサイト {host} を共有します"))

    # Defang at the very start and very end of the text.
    for host in _HOSTS:
        dotted = _defang_host(host, "bracket_dot")
        cases.append((f"{dotted} tops the feed", f"{host} tops the feed"))
        cases.append((f"feed bottom: {dotted}", f"feed bottom: {host}"))

    # Standalone indicator, nothing else in the text.
    for host in _HOSTS:
        cases.append((_defang_host(host, "paren_dot"), host))

    # Capitalized first letter in the defanged scheme.
    for host in _HOSTS:
        cases.append((f"Hxxps://{host}/x seen", f"https://{host}/x seen"))
    return cases
