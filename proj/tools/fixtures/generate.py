#!/usr/bin/env python3
"""Regenerate the shipped models and the test fixture bundle.

Trains a small merge caption model that memorizes one caption per synthetic
scene, trains the reference FER CNN on procedurally drawn faces, and writes
golden values computed with torch so the C++ side can be checked against an
independent implementation.

    python3 tools/fixtures/generate.py --data data --fixtures tests/fixtures

Output is deterministic for a given torch/numpy/Pillow version.
"""

import argparse
import hashlib
import json
import math
import struct
import unicodedata
from collections import Counter
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from PIL import Image, ImageDraw

VOCAB_SIZE = 4028
FEATURE_DIM = 4096
EMBED = 256
HIDDEN = 256
MERGE = 256
MAX_LEN = 34
RESERVED = ["<pad>", "<start>", "<end>", "<unk>"]
EMOTIONS = ["afraid", "angry", "disgusted", "happy", "neutral", "sad", "surprised"]
FER_ARCH = "conv:conv1:1|relu|avgpool:2:2|conv:conv2:1|relu|avgpool:2:2|flatten|dense:fc1:relu|dense:fc2:softmax"

# Multi-syllable words for segmentation.
WORDS = [
    "người đàn ông", "người phụ nữ", "xe đạp", "đạp xe", "con đường", "đường phố", "cánh đồng", "cậu bé",
    "cô bé", "bé gái", "em bé", "đứa trẻ", "trẻ em", "chàng trai", "thanh niên", "ông già", "bà già",
    "hồ bơi", "bãi biển", "bãi cỏ", "quả bóng", "bóng bay", "ngôi nhà", "xe hơi", "bầu trời", "đi bộ",
    "ván trượt", "đá bóng", "ghế đá", "bức tường", "leo núi", "chơi đùa", "xanh dương", "xanh lá",
    "dưới nước", "ngọn đồi", "bờ sông", "con thuyền",
]

# (image id, memorized caption, four more references, scene spec)
SCENES = [
    ("img_00", "một người đàn ông đang đi xe đạp trên một con đường",
     ["Một người đàn ông đang đi xe đạp trên đường.", "người đàn ông đang đạp xe trên con đường",
      "một người đàn ông đang lái xe đạp", "một người đang đi xe đạp trên đường phố"],
     {"bg": (150, 150, 150), "objects": [("xe đạp", (20, 70, 90, 40), (40, 40, 40))], "face": ("neutral", (60, 10))}),
    ("img_01", "một con chó đen và trắng đang chạy qua một cánh đồng",
     ["Một con chó nâu đang chạy qua một cánh đồng.", "một con chó đang chạy trên cánh đồng cỏ",
      "con chó chạy qua bãi cỏ", "một con chó nâu chạy trên cỏ"],
     {"bg": (70, 150, 60), "objects": [("chó", (40, 30, 80, 60), (128, 78, 38))], "face": None}),
    ("img_02", "một cậu bé đang chơi trong hồ bơi",
     ["Một cậu bé đang chơi trong hồ bơi!", "một cậu bé vui vẻ đang bơi trong hồ bơi",
      "cậu bé đang chơi đùa dưới nước", "một đứa trẻ đang chơi trong hồ bơi"],
     {"bg": (40, 120, 200), "objects": [], "face": ("happy", (56, 36))}),
    ("img_03", "một con mèo trắng đang nằm trên ghế",
     ["một con mèo trắng nằm trên ghế", "con mèo đang ngủ trên ghế", "một con mèo đang nằm",
      "một con mèo trắng đang nằm trên một cái ghế"],
     {"bg": (90, 60, 40), "objects": [("mèo", (30, 30, 100, 60), (245, 245, 245))], "face": None}),
    ("img_04", "một cô bé đang chạy trên bãi biển",
     ["một cô bé chạy trên bãi biển", "cô bé đang chạy trên cát", "một bé gái đang chạy dọc bãi biển",
      "một đứa trẻ đang chạy trên bãi biển"],
     {"bg": (230, 210, 150), "objects": [], "face": ("surprised", (56, 30))}),
    ("img_05", "hai con chó đang chơi với một quả bóng đỏ",
     ["hai con chó chơi với quả bóng đỏ", "hai con chó đang chơi bóng", "hai con chó đang đuổi theo một quả bóng",
      "hai con chó đang chơi với một quả bóng"],
     {"bg": (70, 150, 60), "objects": [("bóng", (60, 40, 40, 40), (220, 20, 20))], "face": None}),
    ("img_06", "một người phụ nữ đang đứng trước một ngôi nhà",
     ["một người phụ nữ đứng trước ngôi nhà", "người phụ nữ đang đứng trước nhà",
      "một người phụ nữ đang đứng trước một ngôi nhà trắng", "một người đang đứng trước ngôi nhà"],
     {"bg": (200, 190, 170), "objects": [], "face": ("sad", (56, 30))}),
    ("img_07", "một chiếc xe hơi xanh dương đang đỗ trên đường",
     ["một chiếc xe hơi xanh dương đỗ trên đường", "chiếc xe hơi đang đỗ bên đường",
      "một chiếc xe hơi đang đỗ trên đường phố", "một chiếc xe xanh dương đang đỗ"],
     {"bg": (120, 120, 120), "objects": [("xe hơi", (20, 40, 120, 50), (20, 50, 210))], "face": None}),
    ("img_08", "một con ngựa nâu đang ăn cỏ trên ngọn đồi",
     ["một con ngựa nâu ăn cỏ trên đồi", "con ngựa đang ăn cỏ", "một con ngựa đang đứng trên ngọn đồi",
      "một con ngựa nâu đang ăn cỏ"],
     {"bg": (90, 170, 80), "objects": [("ngựa", (30, 30, 90, 60), (110, 60, 20))], "face": None}),
    ("img_09", "một nhóm người đang đi bộ trên đường phố",
     ["một nhóm người đi bộ trên đường phố", "nhiều người đang đi bộ trên phố",
      "một nhóm người đang đi trên đường", "mọi người đang đi bộ trên đường phố"],
     {"bg": (160, 160, 170), "objects": [], "face": None}),
    ("img_10", "một chàng trai đang nhảy trên ván trượt",
     ["một chàng trai nhảy trên ván trượt", "một thanh niên đang trượt ván", "chàng trai đang nhảy lên cao",
      "một người đang nhảy trên ván trượt"],
     {"bg": (180, 200, 230), "objects": [], "face": ("happy", (56, 20))}),
    ("img_11", "một em bé đang ngồi trên bãi cỏ",
     ["một em bé ngồi trên bãi cỏ", "em bé đang ngồi trên cỏ", "một đứa trẻ đang ngồi trên bãi cỏ",
      "một em bé đang chơi trên bãi cỏ"],
     {"bg": (80, 160, 70), "objects": [], "face": ("neutral", (56, 40))}),
    ("img_12", "một con chim đang bay trên bầu trời",
     ["một con chim bay trên bầu trời", "con chim đang bay", "một con chim đang bay trên trời",
      "một con chim đang bay trên bầu trời xanh"],
     {"bg": (120, 180, 240), "objects": [("chim", (60, 40, 40, 30), (30, 30, 30))], "face": None}),
    ("img_13", "một con thuyền đang trôi trên sông",
     ["một con thuyền trôi trên sông", "con thuyền đang trôi trên mặt nước", "một chiếc thuyền đang trôi trên sông",
      "một con thuyền đang đi trên sông"],
     {"bg": (40, 90, 160), "objects": [("thuyền", (40, 50, 80, 30), (200, 200, 200))], "face": None}),
    ("img_14", "một người đàn ông đang leo núi",
     ["một người đàn ông leo núi", "người đàn ông đang leo lên núi", "một người đang leo núi",
      "một người đàn ông đang leo lên một ngọn núi"],
     {"bg": (140, 120, 100), "objects": [], "face": ("angry", (56, 30))}),
    ("img_15", "hai đứa trẻ đang chơi đá bóng trên sân",
     ["hai đứa trẻ chơi đá bóng trên sân", "hai đứa trẻ đang đá bóng", "hai cậu bé đang chơi đá bóng",
      "trẻ em đang chơi đá bóng trên sân"],
     {"bg": (60, 140, 60), "objects": [], "face": ("happy", (56, 30))}),
    ("img_16", "một con chó đen đang bơi trong nước",
     ["một con chó đen bơi trong nước", "con chó đang bơi", "một con chó đen đang bơi dưới nước",
      "một con chó đang bơi trong nước"],
     {"bg": (40, 110, 180), "objects": [("chó", (40, 40, 70, 40), (20, 20, 20))], "face": None}),
    ("img_17", "một ông già đang ngồi trên ghế đá",
     ["một ông già ngồi trên ghế đá", "ông già đang ngồi nghỉ", "một người đàn ông đang ngồi trên ghế đá",
      "một ông già đang ngồi trên ghế"],
     {"bg": (170, 170, 160), "objects": [], "face": ("sad", (56, 30))}),
    ("img_18", "một bé gái đang cầm một quả bóng bay hồng",
     ["một bé gái cầm quả bóng bay hồng", "bé gái đang cầm bóng bay", "một cô bé đang cầm một quả bóng bay",
      "một bé gái đang cầm một quả bóng bay"],
     {"bg": (220, 230, 240), "objects": [("bóng bay", (112, 8, 36, 44), (250, 130, 190))],
      "face": ("afraid", (56, 30))}),
    ("img_19", "một chiếc xe đạp đỏ dựng cạnh bức tường",
     ["một chiếc xe đạp đỏ cạnh bức tường", "chiếc xe đạp đang dựng cạnh tường",
      "một chiếc xe đạp dựng bên bức tường", "một chiếc xe đạp đỏ đang dựng cạnh một bức tường"],
     {"bg": (210, 200, 180), "objects": [("xe đạp", (30, 40, 100, 50), (210, 25, 25))], "face": None}),
]

IMAGE_W, IMAGE_H = 160, 120


# ---------------------------------------------------------------- text

def normalize(text):
    text = unicodedata.normalize("NFC", text).lower()
    text = unicodedata.normalize("NFC", text)
    kept = [c if unicodedata.category(c)[0] in "LNM" else " " for c in text]
    return " ".join("".join(kept).split())


def segment(normalized, lexicon, longest):
    syl = normalized.split()
    out, i = [], 0
    while i < len(syl):
        for n in range(min(longest, len(syl) - i), 0, -1):
            cand = " ".join(syl[i:i + n])
            if n == 1 or cand in lexicon:
                out.append("_".join(syl[i:i + n]))
                i += n
                break
    return out


# ---------------------------------------------------------------- containers

def write_capw(path, tensors, metadata):
    out = bytearray(b"CAPW")
    out += struct.pack("<HI", 1, len(tensors))
    for name in sorted(tensors, key=lambda s: s.encode()):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw = name.encode()
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<B", arr.ndim)
        out += b"".join(struct.pack("<I", d) for d in arr.shape)
        out += arr.tobytes()
    out += struct.pack("<I", len(metadata))
    for key in sorted(metadata, key=lambda s: s.encode()):
        k, v = key.encode(), str(metadata[key]).encode()
        out += struct.pack("<H", len(k)) + k + struct.pack("<I", len(v)) + v
    Path(path).write_bytes(bytes(out))


def write_capf(path, rows):
    out = bytearray(b"CAPF")
    out += struct.pack("<HI", 1, len(rows))
    for image_id in sorted(rows, key=lambda s: s.encode()):
        arr = np.ascontiguousarray(rows[image_id], dtype="<f4")
        raw = image_id.encode()
        out += struct.pack("<H", len(raw)) + raw + struct.pack("<I", arr.size) + arr.tobytes()
    Path(path).write_bytes(bytes(out))


# ---------------------------------------------------------------- faces

def draw_face(emotion, rng=None, size=48):
    j = (lambda a: int(rng.integers(-a, a + 1))) if rng is not None else (lambda a: 0)
    skin = 200 + j(25)
    img = Image.new("RGB", (size, size), (60 + j(20),) * 3)
    d = ImageDraw.Draw(img)
    ox, oy = j(2), j(2)
    d.ellipse([4 + ox, 2 + oy, 43 + ox, 45 + oy], fill=(skin, int(skin * 0.85), int(skin * 0.7)))
    dark = (30, 20, 20)
    ey = 18 + oy
    for ex in (15 + ox, 32 + ox):
        r = 4 if emotion in ("surprised", "afraid") else 3
        d.ellipse([ex - r, ey - r + 1, ex + r, ey + r - 1], fill=dark)
    by = ey - 7
    lx, rx = 15 + ox, 32 + ox
    if emotion == "angry":
        d.line([lx - 5, by - 2, lx + 5, by + 3], fill=dark, width=2)
        d.line([rx - 5, by + 3, rx + 5, by - 2], fill=dark, width=2)
    elif emotion == "sad":
        d.line([lx - 5, by + 2, lx + 5, by - 2], fill=dark, width=2)
        d.line([rx - 5, by - 2, rx + 5, by + 2], fill=dark, width=2)
    elif emotion == "surprised":
        d.arc([lx - 6, by - 6, lx + 6, by + 2], 200, 340, fill=dark, width=2)
        d.arc([rx - 6, by - 6, rx + 6, by + 2], 200, 340, fill=dark, width=2)
    elif emotion == "afraid":
        d.line([lx - 5, by, lx + 5, by - 4], fill=dark, width=2)
        d.line([rx - 5, by - 4, rx + 5, by], fill=dark, width=2)
    elif emotion == "disgusted":
        d.line([lx - 5, by + 2, lx + 5, by + 2], fill=dark, width=2)
        d.line([rx - 5, by - 3, rx + 5, by + 1], fill=dark, width=2)
    else:
        d.line([lx - 5, by, lx + 5, by], fill=dark, width=2)
        d.line([rx - 5, by, rx + 5, by], fill=dark, width=2)
    my, mx = 33 + oy, 24 + ox
    mouth = (120, 30, 30)
    if emotion == "happy":
        d.arc([mx - 10, my - 8, mx + 10, my + 6], 20, 160, fill=mouth, width=3)
    elif emotion == "sad":
        d.arc([mx - 10, my - 2, mx + 10, my + 10], 200, 340, fill=mouth, width=3)
    elif emotion == "surprised":
        d.ellipse([mx - 5, my - 5, mx + 5, my + 7], fill=mouth)
    elif emotion == "afraid":
        d.ellipse([mx - 7, my - 2, mx + 7, my + 3], fill=mouth)
    elif emotion == "angry":
        d.rectangle([mx - 8, my, mx + 8, my + 3], fill=mouth)
    elif emotion == "disgusted":
        d.line([mx - 9, my + 3, mx - 3, my - 1, mx + 3, my + 3, mx + 9, my - 1], fill=mouth, width=2)
    else:
        d.line([mx - 8, my + 1, mx + 8, my + 1], fill=mouth, width=2)
    arr = np.asarray(img, dtype=np.int16)
    if rng is not None:
        arr = arr + rng.integers(-6, 7, size=arr.shape)
    return np.clip(arr, 0, 255).astype(np.uint8)


def face_tensor(rgb):
    rgb = rgb.astype(np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(luma / 255.0, 0.0, 1.0)[None, :, :]


class FerNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 32, 3)
        self.conv2 = nn.Conv2d(32, 64, 3)
        self.fc1 = nn.Linear(64 * 10 * 10, 128)
        self.fc2 = nn.Linear(128, 7)
        self.pool = nn.AvgPool2d(2, 2)

    def forward(self, x):
        x = self.pool(torch.relu(self.conv1(x)))
        x = self.pool(torch.relu(self.conv2(x)))
        x = torch.relu(self.fc1(x.flatten(1)))
        return self.fc2(x)


def train_fer(seed):
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for _ in range(60):
        for label, emotion in enumerate(EMOTIONS):
            xs.append(face_tensor(draw_face(emotion, rng)))
            ys.append(label)
    x = torch.tensor(np.stack(xs), dtype=torch.float32)
    y = torch.tensor(ys)
    net = FerNet()
    opt = torch.optim.Adam(net.parameters(), lr=1e-3)
    for epoch in range(12):
        perm = torch.randperm(len(x))
        for b in range(0, len(x), 32):
            idx = perm[b:b + 32]
            opt.zero_grad()
            loss = nn.functional.cross_entropy(net(x[idx]), y[idx])
            loss.backward()
            opt.step()
    with torch.no_grad():
        acc = (net(x).argmax(1) == y).float().mean().item()
    print(f"fer: train accuracy {acc:.3f}")
    return net


def export_fer(net, path):
    sd = {k: v.detach().numpy() for k, v in net.state_dict().items()}
    tensors = {
        "conv1.kernel": sd["conv1.weight"], "conv1.bias": sd["conv1.bias"],
        "conv2.kernel": sd["conv2.weight"], "conv2.bias": sd["conv2.bias"],
        "fc1.kernel": sd["fc1.weight"].T, "fc1.bias": sd["fc1.bias"],
        "fc2.kernel": sd["fc2.weight"].T, "fc2.bias": sd["fc2.bias"],
    }
    write_capw(path, tensors, {"model_kind": "fer_cnn", "architecture": FER_ARCH, "input_shape": "1x48x48",
                               "labels": ",".join(EMOTIONS)})


def fer_confidences(net, face):
    with torch.no_grad():
        logits = net(torch.tensor(face[None], dtype=torch.float64).float())
    return torch.softmax(logits.double(), 1)[0].numpy()


# ---------------------------------------------------------------- caption model

class MergeModel(nn.Module):
    def __init__(self):
        super().__init__()
        self.image_dense = nn.Linear(FEATURE_DIM, HIDDEN)
        self.embedding = nn.Embedding(VOCAB_SIZE, EMBED)
        self.lstm = nn.LSTM(EMBED, HIDDEN, batch_first=True)
        self.merge_dense = nn.Linear(2 * HIDDEN, MERGE)
        self.output_dense = nn.Linear(MERGE, VOCAB_SIZE)

    def forward(self, feats, prefixes):
        img = torch.relu(self.image_dense(feats))
        h, _ = self.lstm(self.embedding(prefixes))
        img = img[:, None, :].expand(-1, h.shape[1], -1)
        merged = torch.relu(self.merge_dense(torch.cat([img, h], dim=2)))
        return self.output_dense(merged)

    def greedy(self, feat):
        with torch.no_grad():
            img = torch.relu(self.image_dense(feat[None]))
            state, token, out = None, 1, []
            for _ in range(MAX_LEN):
                h, state = self.lstm(self.embedding(torch.tensor([[token]])), state)
                logits = self.output_dense(torch.relu(self.merge_dense(torch.cat([img, h[:, -1]], dim=1))))
                token = int(torch.argmax(logits[0]))
                if token == 2:
                    break
                out.append(token)
        return out


def export_caption(model, path):
    sd = {k: v.detach().numpy() for k, v in model.state_dict().items()}
    tensors = {
        "image_dense.kernel": sd["image_dense.weight"].T, "image_dense.bias": sd["image_dense.bias"],
        "embedding.embeddings": sd["embedding.weight"],
        "lstm.kernel": sd["lstm.weight_ih_l0"].T, "lstm.recurrent_kernel": sd["lstm.weight_hh_l0"].T,
        "lstm.bias": sd["lstm.bias_ih_l0"] + sd["lstm.bias_hh_l0"],
        "merge_dense.kernel": sd["merge_dense.weight"].T, "merge_dense.bias": sd["merge_dense.bias"],
        "output_dense.kernel": sd["output_dense.weight"].T, "output_dense.bias": sd["output_dense.bias"],
    }
    write_capw(path, tensors, {"model_kind": "caption_merge", "vocab_size": VOCAB_SIZE, "max_len": MAX_LEN,
                               "embedding_dim": EMBED, "hidden_size": HIDDEN, "gate_order": "i,f,c,o"})


def train_caption(features, sequences):
    model = MergeModel()
    opt = torch.optim.Adam(model.parameters(), lr=1e-3)
    width = max(len(s) for s in sequences)
    padded = torch.zeros(len(sequences), width, dtype=torch.long)
    for i, s in enumerate(sequences):
        padded[i, :len(s)] = torch.tensor(s)
    inputs, targets = padded[:, :-1], padded[:, 1:]
    feats = torch.tensor(np.stack(features), dtype=torch.float32)
    for step in range(400):
        opt.zero_grad()
        logits = model(feats, inputs)
        loss = nn.functional.cross_entropy(logits.reshape(-1, VOCAB_SIZE), targets.reshape(-1), ignore_index=0)
        loss.backward()
        opt.step()
        if step % 100 == 0:
            print(f"caption: step {step} loss {loss.item():.4f}")
    print(f"caption: final loss {loss.item():.5f}")
    return model


def lstm_golden(model, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, EMBED).astype(np.float32)
    h0 = rng.uniform(-1, 1, HIDDEN).astype(np.float32)
    c0 = rng.uniform(-1, 1, HIDDEN).astype(np.float32)
    with torch.no_grad():
        _, (h1, c1) = model.lstm(torch.tensor(x)[None, None], (torch.tensor(h0)[None, None], torch.tensor(c0)[None, None]))
    return {"model": "caption_model.capw", "prefix": "lstm", "x": x.tolist(), "h0": h0.tolist(), "c0": c0.tolist(),
            "h1": h1[0, 0].tolist(), "c1": c1[0, 0].tolist()}


# ---------------------------------------------------------------- BLEU

def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(records, max_n=4):
    matched, total = [0] * max_n, [0] * max_n
    c_len = r_len = 0
    for cand, refs in records:
        for n in range(1, max_n + 1):
            cc = ngrams(cand, n)
            best = Counter()
            for r in refs:
                best |= ngrams(r, n)
            matched[n - 1] += sum(min(v, best[g]) for g, v in cc.items())
            total[n - 1] += sum(cc.values())
        c_len += len(cand)
        r_len += min((abs(len(r) - len(cand)), len(r)) for r in refs)[1]
    bp = 1.0 if c_len > r_len else (math.exp(1 - r_len / c_len) if c_len else 0.0)
    scores = []
    for n in range(1, max_n + 1):
        ps = [matched[k] / total[k] if total[k] else 0.0 for k in range(n)]
        scores.append(0.0 if min(ps) <= 0 else bp * math.exp(sum(math.log(p) for p in ps) / n))
    return scores


# ---------------------------------------------------------------- scenes

def fifth_reference(caption):
    words = caption.split()
    if "đang" in words:
        words.remove("đang")
    else:
        words = words[1:]
    return " ".join(words)


def render_scene(spec):
    img = Image.new("RGB", (IMAGE_W, IMAGE_H), spec["bg"])
    d = ImageDraw.Draw(img)
    boxes = []
    for label, (x, y, w, h), color in spec["objects"]:
        d.ellipse([x, y, x + w - 1, y + h - 1], fill=color)
        boxes.append((label, (x, y, w, h)))
    arr = np.asarray(img).copy()
    if spec["face"]:
        emotion, (fx, fy) = spec["face"]
        arr[fy + 48:IMAGE_H, fx - 4:fx + 52] = (60, 60, 140)
        arr[fy:fy + 48, fx:fx + 48] = draw_face(emotion)
        boxes.append(("face", (fx, fy, 48, 48)))
    return arr, boxes


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", default="data")
    ap.add_argument("--fixtures", default="tests/fixtures")
    args = ap.parse_args()
    data, fix = Path(args.data), Path(args.fixtures)
    (data / "models").mkdir(parents=True, exist_ok=True)
    for sub in ("images", "faces"):
        (fix / sub).mkdir(parents=True, exist_ok=True)

    torch.manual_seed(7)
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)

    person_nouns = [l for l in (data / "person_nouns.txt").read_text().splitlines() if l]
    color_terms = [l for l in (data / "color_terms.txt").read_text().splitlines() if l]
    lex_entries = sorted({normalize(w) for w in WORDS + person_nouns + color_terms if len(w.split()) > 1})
    lexicon = set(lex_entries)
    longest = max(len(e.split()) for e in lex_entries)

    # vocabulary: reserved, corpus tokens by frequency then text, placeholders
    counts = Counter()
    for _, train, refs, _ in SCENES:
        for text in [train] + refs + [fifth_reference(train)]:
            counts.update(segment(normalize(text), lexicon, longest))
    corpus_tokens = sorted(counts, key=lambda t: (-counts[t], t))
    vocab = RESERVED + corpus_tokens
    vocab += [f"__filler_{i:04d}" for i in range(VOCAB_SIZE - len(vocab))]
    index = {t: i for i, t in enumerate(vocab)}
    (data / "vocab.txt").write_text("\n".join(vocab) + "\n")
    (data / "lexicon.txt").write_text("\n".join(lex_entries) + "\n")

    # features
    features = {}
    for i, (image_id, *_rest) in enumerate(SCENES):
        v = np.random.default_rng(1000 + i).standard_normal(FEATURE_DIM)
        features[image_id] = np.maximum(v, 0).astype(np.float32)
    write_capf(fix / "features.capf", features)

    # captions
    sequences = []
    for image_id, train, _, _ in SCENES:
        sequences.append([1] + [index[t] for t in segment(normalize(train), lexicon, longest)] + [2])
    model = train_caption([features[s[0]] for s in SCENES], sequences)
    decoded = {}
    for (image_id, train, _, _), seq in zip(SCENES, sequences):
        out = model.greedy(torch.tensor(features[image_id]))
        assert out == seq[1:-1], f"{image_id} not memorized: {[vocab[t] for t in out]}"
        decoded[image_id] = " ".join(vocab[t].replace("_", " ") for t in out)
    export_caption(model, data / "models" / "caption_model.capw")
    (fix / "expected_captions.tsv").write_text("".join(f"{k}\t{v}\n" for k, v in decoded.items()))
    (fix / "lstm_golden.json").write_text(json.dumps(lstm_golden(model, 11)) + "\n")

    # references: four paraphrases plus the memorized caption with a word dropped
    references = {image_id: refs + [fifth_reference(train)] for image_id, train, refs, _ in SCENES}
    with open(fix / "captions.tsv", "w") as f:
        for image_id, refs in references.items():
            for text in refs:
                f.write(f"{image_id}\t{text}\n")
    records = []
    for image_id, refs in references.items():
        cand = segment(normalize(decoded[image_id]), lexicon, longest)
        records.append((cand, [segment(normalize(t), lexicon, longest) for t in refs]))
    scores = corpus_bleu(records)
    report = f"records: {len(records)}\n" + "".join(f"BLEU-{n + 1}: {s:.4f}\n" for n, s in enumerate(scores))
    (fix / "bleu_golden.txt").write_text(report)
    print(report, end="")

    # FER
    fer = train_fer(3)
    export_fer(fer, data / "models" / "fer_model.capw")
    rng = np.random.default_rng(99)
    manifest, golden = [], []
    for emotion in EMOTIONS:
        for n in range(2):
            face = draw_face(emotion, rng)
            name = f"faces/{emotion}_{n}.png"
            Image.fromarray(face).save(fix / name)
            conf = fer_confidences(fer, face_tensor(face))
            manifest.append(f"{name}\t{emotion}\n")
            golden.append({"image": name, "truth": emotion, "label": EMOTIONS[int(np.argmax(conf))],
                           "confidences": conf.tolist()})
    (fix / "fer_manifest.tsv").write_text("".join(manifest))
    (fix / "fer_golden.json").write_text(json.dumps(golden, indent=1, ensure_ascii=False) + "\n")

    # scenes and sidecar boxes
    box_lines = []
    for image_id, _, _, spec in SCENES:
        arr, boxes = render_scene(spec)
        Image.fromarray(arr).save(fix / "images" / f"{image_id}.png")
        for label, (x, y, w, h) in boxes:
            box_lines.append(f"{image_id}\t{label}\t{x},{y},{w},{h}\n")
        if spec["face"]:
            emotion, (fx, fy) = spec["face"]
            conf = fer_confidences(fer, face_tensor(arr[fy:fy + 48, fx:fx + 48]))
            assert EMOTIONS[int(np.argmax(conf))] == emotion, f"{image_id}: face read as {EMOTIONS[int(np.argmax(conf))]}"
    (fix / "boxes.tsv").write_text("".join(box_lines))

    red = np.zeros((32, 32, 3), dtype=np.uint8)
    red[..., 0] = 255
    Image.fromarray(red).save(fix / "solid_red.png")

    files = sorted([p for p in fix.rglob("*") if p.is_file() and p.name != "manifest.json"] +
                   [data / "models" / "caption_model.capw", data / "models" / "fer_model.capw",
                    data / "vocab.txt", data / "lexicon.txt"])
    manifest_json = {
        "files": {str(p): sha(p) for p in files},
        "caption_model": {"embedding_dim": EMBED, "hidden_size": HIDDEN, "merge_width": MERGE,
                          "vocab_size": VOCAB_SIZE, "corpus_tokens": len(corpus_tokens), "optimizer": "adam 1e-3",
                          "steps": 400, "features": "relu(N(0,1)) per image, seed 1000+i"},
        "fer_model": {"architecture": FER_ARCH, "optimizer": "adam 1e-3", "epochs": 12, "faces_per_class": 60},
        "torch": torch.__version__,
    }
    (fix / "manifest.json").write_text(json.dumps(manifest_json, indent=1) + "\n")


if __name__ == "__main__":
    main()
