"""Smoke test for the wisflow extension: check, pretty-print, and walk the
example workflow through the in-process API."""

import tempfile
from pathlib import Path

import wisflow


def main():
    with tempfile.TemporaryDirectory() as tmp:
        project = Path(tmp) / "p"
        wisflow.init_project(str(project))

        ok, diags = wisflow.check(str(project))
        assert ok and diags == [], diags

        broken = {p.name: p.read_text() for p in project.iterdir() if p.is_file()}
        broken["GradeThesis.act"] = broken["GradeThesis.act"].replace("SetGrade2Page", "NoSuchPage", 1)
        ok, diags = wisflow.check_sources(broken)
        assert not ok and any("error[L003]" in d for d in diags), diags

        text = (project / "theses.cd").read_text()
        once = wisflow.pretty("theses.cd", text)
        assert wisflow.pretty("theses.cd", once) == once

        assert ("POST", "/login") in wisflow.routes()

        app = wisflow.App(str(project))
        status, _, body = app.request("GET", "/activities")
        assert status == 200 and [a["name"] for a in body] == ["GradeThesis"], body

        token = app.login("ref1", "ref1-secret")
        status, _, body = app.request("GET", "/class/Staff", token=token)
        assert status == 200, body

        status, _, body = app.request("POST", "/login", {"login": "ref1", "password": "wrong"})
        assert status == 401, body

    print("smoke test passed")


if __name__ == "__main__":
    main()
