from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("suite")


def make_post(post_id="p1", text="hello", created_at=1_000_000, lang="en", **kw):
    from phishreports.corpus import PostRecord

    return PostRecord(
        post_id=post_id,
        author_id=kw.pop("author_id", "a1"),
        created_at=created_at,
        lang=lang,
        text=text,
        **kw,
    )
