import json
from pathlib import Path

import numpy as np
import pytest

from dimreal.detection import Detection2D, PrivacyState, TrackedObject
from dimreal.errors import ProtocolError
from dimreal.geometry import CalibrationState, Point3, Pose
from dimreal.masks import BinaryMask
from dimreal.pipeline import ConfirmCalibration, SetCalibration, ToggleObject
from dimreal.wsproto import (decode_frame_msg, encode_frame_msg,
                             parse_client_message, serialize_client_message,
                             serialize_object_update)

FIXTURES = Path(__file__).parent / "fixtures"


def make_track(track_id, center, state, missed=0, label="monitor"):
    bits = np.zeros((36, 64), dtype=bool)
    bits[10:20, 20:30] = True
    det = Detection2D.from_mask(label, BinaryMask(bits))
    return TrackedObject(id=track_id, class_label=label, latest=det,
                         bbox3d_center=center,
                         bbox3d_size=np.array([0.4, 0.3, 0.075]),
                         state=state, missed_frames=missed)


def confirmed_calibration(pose=None):
    calib = CalibrationState()
    calib.set_marker(pose or Pose.identity())
    calib.confirm()
    return calib


class TestObjectUpdate:
    def test_zero_tracks(self):
        text = serialize_object_update([], confirmed_calibration(), 7)
        assert json.loads(text) == {"type": "objects", "frame_id": 7, "objects": []}

    def test_identity_calibration_passes_camera_coords(self):
        track = make_track(1, Point3(0.0, 0.0, 2.0), PrivacyState.PRIVATE)
        doc = json.loads(serialize_object_update([track], confirmed_calibration(), 1))
        (obj,) = doc["objects"]
        assert obj["center"] == [0.0, 0.0, 2.0]
        assert obj["state"] == "private"

    def test_translation_calibration_shifts_center(self):
        track = make_track(1, Point3(0.0, 0.0, 2.0), PrivacyState.PUBLIC)
        calib = confirmed_calibration(Pose(np.eye(3), [1.0, 0.0, 0.0]))
        doc = json.loads(serialize_object_update([track], calib, 1))
        assert doc["objects"][0]["center"] == [1.0, 0.0, 2.0]

    def test_one_entry_per_live_track_sorted_by_id(self):
        tracks = [make_track(i, Point3(0, 0, 1.0), PrivacyState.PUBLIC)
                  for i in (3, 1, 2)]
        doc = json.loads(serialize_object_update(tracks, confirmed_calibration(), 0))
        assert [o["id"] for o in doc["objects"]] == [1, 2, 3]

    def test_stale_flag_for_missed_tracks(self):
        track = make_track(1, Point3(0, 0, 1.0), PrivacyState.PUBLIC, missed=2)
        doc = json.loads(serialize_object_update([track], confirmed_calibration(), 0))
        assert doc["objects"][0]["stale"] is True

    def test_requires_confirmed_calibration(self):
        with pytest.raises(ProtocolError):
            serialize_object_update([], CalibrationState(), 0)

    def test_golden_byte_stable(self):
        t1 = make_track(1, Point3(0.125, -0.25, 2.0), PrivacyState.PRIVATE)
        t2 = make_track(2, Point3(1 / 3, 0.5, 1.2345678), PrivacyState.PUBLIC,
                        missed=2, label="plant")
        t2.bbox3d_size = np.array([0.2, 0.26, 0.05])
        calib = confirmed_calibration(Pose(np.eye(3), [1.0, 0.0, 0.0]))
        text = serialize_object_update([t2, t1], calib, 17)
        assert text == (FIXTURES / "object_update.golden.json").read_text()


class TestParseClientMessage:
    def test_toggle(self):
        assert parse_client_message('{"type":"toggle","id":3}') == ToggleObject(3)

    def test_confirm(self):
        assert parse_client_message('{"type":"confirm"}') == ConfirmCalibration()

    def test_calibration(self):
        pose = Pose(np.eye(3), [0.5, -1.0, 2.0])
        msg = parse_client_message(json.dumps({"type": "calibration",
                                               "pose": pose.to_flat()}))
        assert isinstance(msg, SetCalibration)
        assert msg.pose.allclose(pose, atol=1e-15)

    def test_extra_fields_ignored(self):
        msg = parse_client_message('{"type":"toggle","id":1,"junk":true}')
        assert msg == ToggleObject(1)

    def test_pose_arity_error(self):
        bad = json.dumps({"type": "calibration", "pose": [0.0] * 8})
        with pytest.raises(ProtocolError, match="arity") as err:
            parse_client_message(bad)
        assert err.value.field == "pose"

    @pytest.mark.parametrize("text,field", [
        ("not json", "json"),
        ("[]", "json"),
        ('{"id":3}', "type"),
        ('{"type":"warp"}', "type"),
        ('{"type":"toggle"}', "id"),
        ('{"type":"toggle","id":-1}', "id"),
        ('{"type":"toggle","id":true}', "id"),
        ('{"type":"calibration"}', "pose"),
    ])
    def test_rejections_name_field(self, text, field):
        with pytest.raises(ProtocolError) as err:
            parse_client_message(text)
        assert err.value.field == field

    @pytest.mark.parametrize("msg", [
        ToggleObject(5),
        ConfirmCalibration(),
        SetCalibration(Pose(np.eye(3), [0.1, 0.2, 0.3])),
    ])
    def test_serialize_parse_round_trip(self, msg):
        parsed = parse_client_message(serialize_client_message(msg))
        if isinstance(msg, SetCalibration):
            assert parsed.pose.allclose(msg.pose, atol=1e-15)
        else:
            assert parsed == msg

    @pytest.mark.parametrize("name", ["toggle", "confirm", "calibration"])
    def test_client_goldens_byte_stable(self, name):
        golden = (FIXTURES / f"client_{name}.golden.json").read_text()
        msg = parse_client_message(golden)
        assert serialize_client_message(msg) == golden


class TestFrameMsg:
    def test_round_trip(self):
        data = encode_frame_msg(71, b"\xff\xd8jpegdata")
        assert decode_frame_msg(data) == (71, b"\xff\xd8jpegdata")

    def test_short_message_rejected(self):
        with pytest.raises(ProtocolError):
            decode_frame_msg(b"\x00\x01")
