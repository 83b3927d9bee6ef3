import json

import pytest
from fastapi.testclient import TestClient

from pervascan.imagekit import RenderSpec, render_ean13, save_pgm
from pervascan.imagestore import (
    HttpPhotoStore,
    InvalidImage,
    InvalidTag,
    PhotoNotFound,
    PhotoStore,
    create_store_app,
    valid_photo_id,
)

PGM = save_pgm(render_ean13("9780131103627", RenderSpec(module_px=2, bar_height_px=8)))


@pytest.fixture
def store(tmp_path):
    return PhotoStore(tmp_path / "photos", seed=7)


class TestPhotoStore:
    def test_upload_fetch_round_trip(self, store):
        photo_id = store.upload(PGM)
        assert store.fetch(photo_id) == PGM

    def test_ids_are_unique_even_for_identical_bytes(self, store):
        assert store.upload(PGM) != store.upload(PGM)

    def test_id_shape(self, store):
        photo_id = store.upload(PGM)
        assert len(photo_id) == 16
        assert set(photo_id) <= set("0123456789abcdef")

    def test_seeded_ids_reproducible(self, tmp_path):
        a = PhotoStore(tmp_path / "a", seed=1).upload(PGM)
        b = PhotoStore(tmp_path / "b", seed=1).upload(PGM)
        assert a == b

    def test_garbage_upload_rejected(self, store):
        with pytest.raises(InvalidImage):
            store.upload(b"not a pgm at all")

    def test_fetch_unknown(self, store):
        with pytest.raises(PhotoNotFound):
            store.fetch("00000000deadbeef")

    def test_fetch_hostile_id(self, store):
        with pytest.raises(PhotoNotFound):
            store.fetch("../../etc/passwd")

    def test_fresh_upload_has_no_tags(self, store):
        assert store.get_tags(store.upload(PGM)) == []

    def test_add_tags_preserves_order(self, store):
        photo_id = store.upload(PGM)
        store.add_tags(photo_id, ["first", "second"])
        store.add_tags(photo_id, ["third"])
        assert store.get_tags(photo_id) == ["first", "second", "third"]

    def test_add_tags_idempotent(self, store):
        photo_id = store.upload(PGM)
        store.add_tags(photo_id, ["title:C Programming Language"])
        store.add_tags(photo_id, ["title:C Programming Language"])
        assert store.get_tags(photo_id) == ["title:C Programming Language"]

    def test_add_tags_unknown_photo(self, store):
        with pytest.raises(PhotoNotFound):
            store.add_tags("feedfacefeedface", ["x"])

    def test_get_tags_unknown_photo(self, store):
        with pytest.raises(PhotoNotFound):
            store.get_tags("feedfacefeedface")

    def test_invalid_tags(self, store):
        photo_id = store.upload(PGM)
        with pytest.raises(InvalidTag):
            store.add_tags(photo_id, [""])
        with pytest.raises(InvalidTag):
            store.add_tags(photo_id, ["x" * 129])
        with pytest.raises(InvalidTag):
            store.add_tags(photo_id, ["line\nbreak"])

    def test_tag_writes_never_touch_image(self, store):
        photo_id = store.upload(PGM)
        for n in range(5):
            store.add_tags(photo_id, [f"tag{n}"])
        assert store.fetch(photo_id) == PGM

    def test_persistence_on_disk(self, tmp_path, store):
        photo_id = store.upload(PGM)
        store.add_tags(photo_id, ["a"])
        files = {p.name for p in (tmp_path / "photos").iterdir()}
        assert files == {f"{photo_id}.pgm", f"{photo_id}.tags.json"}
        assert json.loads((tmp_path / "photos" / f"{photo_id}.tags.json").read_text()) == ["a"]

    def test_valid_photo_id(self):
        assert valid_photo_id("abc123-_.~")
        assert not valid_photo_id("")
        assert not valid_photo_id("has space")
        assert not valid_photo_id("slash/slash")


class TestStoreHttp:
    @pytest.fixture
    def client(self, store):
        return TestClient(create_store_app(store))

    def test_upload_endpoint(self, client):
        reply = client.post(
            "/store/photos",
            content=PGM,
            headers={"Content-Type": "image/x-portable-graymap"},
        )
        assert reply.status_code == 201
        assert "photo_id" in reply.json()

    def test_upload_endpoint_rejects_garbage(self, client):
        reply = client.post("/store/photos", content=b"junk")
        assert reply.status_code == 400
        assert reply.json() == {"error": "invalid_image"}

    def test_fetch_endpoint(self, client):
        photo_id = client.post("/store/photos", content=PGM).json()["photo_id"]
        reply = client.get(f"/store/photos/{photo_id}")
        assert reply.status_code == 200
        assert reply.content == PGM
        assert reply.headers["content-type"] == "image/x-portable-graymap"

    def test_fetch_endpoint_404(self, client):
        reply = client.get("/store/photos/feedfacefeedface")
        assert reply.status_code == 404
        assert reply.json() == {"error": "photo_not_found"}

    def test_tags_endpoints(self, client):
        photo_id = client.post("/store/photos", content=PGM).json()["photo_id"]
        reply = client.post(f"/store/photos/{photo_id}/tags", json={"tags": ["a", "b"]})
        assert reply.status_code == 200
        assert reply.json() == {"tags": ["a", "b"]}
        assert client.get(f"/store/photos/{photo_id}/tags").json() == {"tags": ["a", "b"]}

    def test_tags_endpoint_404(self, client):
        assert client.post("/store/photos/nope/tags", json={"tags": ["a"]}).status_code == 404
        assert client.get("/store/photos/nope/tags").status_code == 404

    def test_tags_endpoint_bad_body(self, client):
        photo_id = client.post("/store/photos", content=PGM).json()["photo_id"]
        assert client.post(f"/store/photos/{photo_id}/tags", content=b"{").status_code == 400
        assert (
            client.post(f"/store/photos/{photo_id}/tags", json={"tags": "x"}).status_code
            == 400
        )

    def test_http_client_round_trip(self, store):
        transport_client = TestClient(create_store_app(store))
        remote = HttpPhotoStore("http://testserver", client=transport_client)
        photo_id = remote.upload(PGM)
        assert remote.fetch(photo_id) == PGM
        remote.add_tags(photo_id, ["x"])
        assert remote.get_tags(photo_id) == ["x"]
        with pytest.raises(PhotoNotFound):
            remote.fetch("feedfacefeedface")
        with pytest.raises(InvalidImage):
            remote.upload(b"junk")
