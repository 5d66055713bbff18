import numpy as np
import pytest

from oevla.images import (
    ImageError,
    ImageStore,
    concat_views,
    decode_png,
    encode_png,
    image_id,
)
from oevla.prompt import DEFAULT_PATCH_COUNT, assemble_prompt, hash_tokenizer
from oevla.types import (
    Episode,
    Frame,
    ImageRef,
    Instruction,
    InstructionForm,
    LanguageAnnotation,
    TextSpan,
    TrainingSample,
    ValidationError,
    check_action,
)


def test_png_round_trip_exact():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
    assert np.array_equal(decode_png(encode_png(img)), img)


def test_png_encoding_canonical():
    img = np.zeros((16, 16, 3), dtype=np.uint8)
    a, b = encode_png(img), encode_png(img.copy())
    assert a == b
    assert a.startswith(b"\x89PNG\r\n\x1a\n")
    # re-encoding a decode yields the same bytes: content-addressing is stable
    assert encode_png(decode_png(a)) == a


def test_png_decoder_handles_all_filters():
    # a synthetic PNG using filters 1-4 row by row
    import struct
    import zlib

    h, w = 5, 4
    rng = np.random.default_rng(7)
    img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)

    def chunk(tag, payload):
        out = struct.pack(">I", len(payload)) + tag + payload
        return out + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)

    raw = bytearray()
    prev = np.zeros((w, 3), dtype=np.int32)
    for y, filt in zip(range(h), (0, 1, 2, 3, 4)):
        row = img[y].astype(np.int32)
        raw.append(filt)
        for x in range(w):
            for c in range(3):
                cur = int(row[x, c])
                left = int(row[x - 1, c]) if x else 0
                up = int(prev[x, c])
                ul = int(prev[x - 1, c]) if x else 0
                if filt == 0:
                    enc = cur
                elif filt == 1:
                    enc = cur - left
                elif filt == 2:
                    enc = cur - up
                elif filt == 3:
                    enc = cur - (left + up) // 2
                else:
                    p = left + up - ul
                    pa, pb, pc = abs(p - left), abs(p - up), abs(p - ul)
                    if pa <= pb and pa <= pc:
                        pred = left
                    elif pb <= pc:
                        pred = up
                    else:
                        pred = ul
                    enc = cur - pred
                raw.append(enc & 0xFF)
        prev = row
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    data = (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", zlib.compress(bytes(raw)))
        + chunk(b"IEND", b"")
    )
    assert np.array_equal(decode_png(data), img)


def test_encode_rejects_bad_shapes():
    with pytest.raises(ImageError):
        encode_png(np.zeros((8, 8), dtype=np.uint8))
    with pytest.raises(ImageError):
        encode_png(np.zeros((8, 8, 3), dtype=np.float32))


def test_image_id_is_digest_of_bytes():
    img = np.full((8, 8, 3), 9, dtype=np.uint8)
    data = encode_png(img)
    import hashlib

    assert image_id(data) == hashlib.sha256(data).hexdigest()


def test_concat_views_side_by_side():
    left = np.zeros((16, 16, 3), dtype=np.uint8)
    right = np.full((16, 16, 3), 255, dtype=np.uint8)
    both = concat_views(left, right)
    assert both.shape == (16, 32, 3)
    assert both[0, 0, 0] == 0 and both[0, 31, 0] == 255
    with pytest.raises(ImageError):
        concat_views(left, np.zeros((8, 16, 3), dtype=np.uint8))


def test_image_store_flush_and_reload(tmp_path):
    store = ImageStore()
    img = np.full((8, 8, 3), 3, dtype=np.uint8)
    iid = store.put(img)
    store.flush(str(tmp_path))
    reloaded = ImageStore(str(tmp_path))
    assert np.array_equal(reloaded.get(iid), img)
    assert iid in reloaded.ids()


def test_check_action_bounds():
    check_action(np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]))
    with pytest.raises(ValidationError):
        check_action(np.array([1.5, 0, 0, 0, 0, 0, 1.0]))
    with pytest.raises(ValidationError):
        check_action(np.array([0, 0, 0, 0, 0, 0, 0.5]))  # gripper must be +-1


def test_instruction_image_count_rules():
    Instruction(InstructionForm.LANG, (TextSpan("lift the red block"),))
    with pytest.raises(ValidationError):
        Instruction(InstructionForm.LANG, (TextSpan("x"), ImageRef("a" * 64)))
    with pytest.raises(ValidationError):
        Instruction(InstructionForm.OIF, (TextSpan("go"),))  # needs exactly 1
    with pytest.raises(ValidationError):
        Instruction(
            InstructionForm.VDL,
            (TextSpan("p"), ImageRef("a" * 64), ImageRef("b" * 64)),
        )  # needs exactly 4
    vos = Instruction(InstructionForm.VOS, (TextSpan("lift "), ImageRef("a" * 64)))
    assert vos.image_ids == ("a" * 64,)


def test_instruction_json_round_trip():
    instr = Instruction(
        InstructionForm.VOS,
        (TextSpan("push "), ImageRef("c" * 64), TextSpan(" to the left")),
    )
    back = Instruction.from_json(instr.to_json())
    assert back == instr
    assert back.text == "push  to the left"


def test_annotation_slots_validated():
    LanguageAnnotation("lift the red block", (((9, 18), "red_block"),))
    with pytest.raises(ValidationError):
        LanguageAnnotation("abc", (((1, 9), "x"),))  # out of bounds
    with pytest.raises(ValidationError):
        LanguageAnnotation(
            "abcdef", (((0, 3), "x"), ((2, 5), "y"))
        )  # overlapping


def test_prompt_token_arithmetic_single_image():
    instr = Instruction(InstructionForm.OIF, (TextSpan("follow the command in "), ImageRef("a" * 64)))
    seq = assemble_prompt(instr)
    text_tokens = len(hash_tokenizer("follow the command in "))
    assert seq.total_tokens == DEFAULT_PATCH_COUNT + text_tokens + DEFAULT_PATCH_COUNT


def test_prompt_token_arithmetic_video_demo():
    # 7 text tokens plus four images: 729 + 7 + 4*729 = 3652
    text = "perform the demonstrated actions in "
    assert len(hash_tokenizer(text)) == 5
    padded = "please now perform the demonstrated actions in "
    assert len(hash_tokenizer(padded)) == 7
    instr = Instruction(
        InstructionForm.VDL,
        (TextSpan(padded), *[ImageRef(chr(97 + i) * 64) for i in range(4)]),
    )
    seq = assemble_prompt(instr)
    assert seq.total_tokens == 729 + 7 + 4 * 729 == 3652


def test_prompt_starts_with_observation_block():
    instr = Instruction(InstructionForm.LANG, (TextSpan("lift the red block"),))
    seq = assemble_prompt(instr)
    first = seq.blocks[0]
    assert type(first).__name__ == "ObsBlock"
    assert first.count == DEFAULT_PATCH_COUNT


def test_hash_tokenizer_deterministic_and_bounded():
    ids = hash_tokenizer("push the blue block to the left")
    assert ids == hash_tokenizer("push the blue block to the left")
    assert all(0 <= t < 32000 for t in ids)
    assert hash_tokenizer("") == []


def test_episode_validation():
    frames = [
        Frame(
            static_view=np.zeros((8, 8, 3), dtype=np.uint8),
            wrist_view=np.zeros((8, 8, 3), dtype=np.uint8),
            proprio=np.zeros(7),
            timestep=t,
        )
        for t in range(3)
    ]
    ann = LanguageAnnotation("lift the red block", (((9, 18), "red_block"),))
    actions = np.zeros((2, 7))
    actions[:, 6] = 1.0
    ep = Episode(id="ep", frames=tuple(frames), actions=actions, annotation=ann, env_id="A")
    assert len(ep) == 3
    with pytest.raises(ValidationError):
        Episode(id="bad", frames=tuple(frames), actions=np.zeros((3, 7)), annotation=ann, env_id="A")


def test_training_sample_json_round_trip():
    instr = Instruction(InstructionForm.LANG, (TextSpan("open the drawer"),))
    sample = TrainingSample(
        id="s1",
        form=InstructionForm.LANG,
        episode_id="ep1",
        t=5,
        obs_id="d" * 64,
        instruction=instr,
        target_tokens=tuple(range(151808, 151808 + 35)),
    )
    back = TrainingSample.from_json(sample.to_json())
    assert back == sample
