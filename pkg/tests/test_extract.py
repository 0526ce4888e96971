import pytest
from hypothesis import given
from hypothesis import strategies as st

from phishreports.ioc import (
    SOURCE_IMAGE,
    SOURCE_TEXT,
    extract_indicators,
    extract_post_indicators,
    refang,
    validate_domain,
    validate_url,
)
from phishreports.psl import PublicSuffixList

from conftest import make_post


class TestExtractExamples:
    def test_defanged_url_hand_parse(self):
        (ind,) = extract_indicators("PHISHING hxxps://login.evil.top/x")
        assert ind.normalized_url == "https://login.evil.top/x"
        assert ind.defang_form == "hxxp_lower"
        assert ind.tld == "top"
        assert ind.host == "login.evil.top"
        assert ind.is_url
        assert ind.raw == "hxxps://login.evil.top/x"

    def test_domain_and_url_both_extracted(self):
        found = extract_indicators("evil[.]com and https://evil.com/a")
        assert len(found) == 2
        assert {i.host for i in found} == {"evil.com"}
        by_url = {i.is_url: i for i in found}
        assert by_url[False].raw == "evil[.]com"
        assert by_url[False].defang_form == "bracket_dot"
        assert by_url[False].normalized_url == "https://evil.com/"
        assert by_url[True].normalized_url == "https://evil.com/a"

    def test_empty_text(self):
        assert extract_indicators("") == []

    def test_duplicate_urls_dedup(self):
        found = extract_indicators("go http://evil.com/a and again http://evil.com/a")
        assert len(found) == 1

    def test_source_and_image_id_recorded(self):
        (ind,) = extract_indicators("see evil.top now", source=SOURCE_IMAGE, image_id="img9")
        assert ind.source == SOURCE_IMAGE
        assert ind.image_id == "img9"
        assert not ind.is_url

    def test_bare_domain_not_matched_inside_url(self):
        found = extract_indicators("https://t.example.com/r?next=evil.com")
        assert len(found) == 1
        assert found[0].host == "t.example.com"

    def test_email_domain_skipped(self):
        assert extract_indicators("mail me at user@example.com thanks") == []

    def test_trailing_punctuation_trimmed(self):
        (ind,) = extract_indicators("check (http://evil.com/a), ok?")
        assert ind.normalized_url == "http://evil.com/a"

    def test_fullwidth_dot_domain(self):
        (ind,) = extract_indicators("偽サイト evil．com に注意")
        assert ind.host == "evil.com"

    def test_registrable_domain_from_psl(self):
        (ind,) = extract_indicators("login.evil.co.uk is bad")
        assert ind.registrable_domain == "evil.co.uk"
        assert ind.tld == "uk"

    def test_dyndns_subdomain_registrable(self):
        (ind,) = extract_indicators("http://brand.duckdns.org/login")
        assert ind.registrable_domain == "duckdns.org"

    def test_scheme_from_bare_domain_promoted_form(self):
        (ind,) = extract_indicators("evil.top")
        assert ind.normalized_url == "https://evil.top/"
        assert not ind.is_url

    def test_multiword_ja_text(self):
        found = extract_indicators("【注意】hxxps://login[.]evil[.]top/x 絶対に開かない")
        assert [i.normalized_url for i in found] == ["https://login.evil.top/x"]

    def test_invalid_host_rejected(self):
        assert extract_indicators("http://exa_mple.com/x") == []

    def test_file_like_token_is_a_format_valid_domain(self):
        # Format-only validation keeps "report.pdf"-shaped tokens out only
        # when the TLD fails the alphabetic rule; "pdf" passes.
        found = extract_indicators("see report.pdf here")
        assert [i.host for i in found] == ["report.pdf"]


class TestExtractProperties:
    @given(st.text(max_size=150))
    def test_never_crashes_and_hosts_validate(self, text):
        for indicator in extract_indicators(text):
            assert validate_domain(indicator.host).ok
            assert validate_url(indicator.normalized_url).ok

    @given(st.text(alphabet="abc.[]()\\ hxp:/{}．", max_size=80))
    def test_extraction_stable_under_refang(self, text):
        before = extract_indicators(text)
        after = extract_indicators(refang(text))
        assert [i.normalized_url for i in before] == [i.normalized_url for i in after]

    def test_defang_form_metadata_differs_but_urls_match(self):
        defanged = "hxxp://evil[.]com/a"
        plain = refang(defanged)
        d = extract_indicators(defanged)
        p = extract_indicators(plain)
        assert [i.normalized_url for i in d] == [i.normalized_url for i in p]
        assert d[0].defang_form == "hxxp_lower"
        assert p[0].defang_form == "none"


class TestExtractPostIndicators:
    def test_text_and_image_sources(self):
        post = make_post(
            text="alert hxxp://evil.top/a",
            image_texts=(
                __import__("phishreports.corpus", fromlist=["ImageText"]).ImageText(
                    "img1", "verify at http://evil.top/b now"
                ),
            ),
        )
        found = extract_post_indicators(post)
        assert {(i.source, i.normalized_url) for i in found} == {
            (SOURCE_TEXT, "http://evil.top/a"),
            (SOURCE_IMAGE, "http://evil.top/b"),
        }

    def test_absent_image_text_skipped(self):
        from phishreports.corpus import ImageText

        post = make_post(text="nothing", image_texts=(ImageText("img1", None),))
        assert extract_post_indicators(post) == []


class TestPublicSuffixList:
    def test_basic(self):
        psl = PublicSuffixList(["com", "co.uk"])
        assert psl.registrable_domain("a.b.evil.com") == "evil.com"
        assert psl.registrable_domain("x.evil.co.uk") == "evil.co.uk"

    def test_unknown_tld_falls_back_to_last_label(self):
        psl = PublicSuffixList(["com"])
        assert psl.registrable_domain("a.b.oddtld") == "b.oddtld"

    def test_suffix_itself(self):
        psl = PublicSuffixList(["com"])
        assert psl.registrable_domain("com") == "com"

    def test_wildcard_and_exception(self):
        psl = PublicSuffixList(["*.ck", "!www.ck"])
        assert psl.registrable_domain("a.b.ck") == "a.b.ck"
        assert psl.registrable_domain("x.www.ck") == "www.ck"

    def test_bundled_is_cached(self):
        assert PublicSuffixList.bundled() is PublicSuffixList.bundled()
