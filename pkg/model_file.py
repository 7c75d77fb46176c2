"""Binary model file for :class:`lstm.DeepLstmModel`.

Layout (all integers unsigned, all values little-endian)::

    magic           8 bytes   b"EOGLSTM\\0"
    format version  uint32    currently 1
    n_channels      uint32    N_c, inputs of the first layer
    n_layers        uint32
    hidden_size     uint32    H
    n_outputs       uint32
    dropout rates   n_layers x float64
    n_tensors       uint32
    then n_tensors records:
        name length uint16
        name        utf-8 bytes, e.g. "layer0.W_f", "head.b"
        rows        uint32
        cols        uint32    (1 for bias vectors)
        values      rows x cols float64, row-major

Tensors are written in :meth:`DeepLstmModel.parameters` order: for each layer
W_f, W_i, W_s, W_o, b_f, b_i, b_s, b_o, then head.W and head.b.
"""
import logging
import os
import struct

import numpy as np

from errors import ModelFormatError
from lstm import DeepLstmModel, GATES, LstmLayerParams

logger = logging.getLogger(__name__)

MAGIC = b"EOGLSTM\0"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIIII")


def save_model(path, model: DeepLstmModel) -> str:
    path = str(path)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    tensors = model.parameters()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, model.n_channels, len(model.layers), model.hidden_size,
                             model.n_outputs))
        f.write(np.asarray(model.dropout_rates, dtype="<f8").tobytes())
        f.write(struct.pack("<I", len(tensors)))
        for name, tensor in tensors.items():
            encoded = name.encode("utf-8")
            matrix = tensor.reshape(tensor.shape[0], -1)
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<II", matrix.shape[0], matrix.shape[1]))
            f.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())
    logger.debug("Wrote model (%d tensors) to %s", len(tensors), path)
    return path


class _Reader:
    def __init__(self, payload: bytes, path: str):
        self._payload = payload
        self._offset = 0
        self._path = path

    def take(self, n_bytes: int) -> bytes:
        if self._offset + n_bytes > len(self._payload):
            raise ModelFormatError("{}: truncated model file at byte {}".format(self._path, self._offset))
        chunk = self._payload[self._offset:self._offset + n_bytes]
        self._offset += n_bytes
        return chunk

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))

    @property
    def exhausted(self) -> bool:
        return self._offset == len(self._payload)


def load_model(path) -> DeepLstmModel:
    path = str(path)
    with open(path, "rb") as f:
        reader = _Reader(f.read(), path)

    magic, version, n_channels, n_layers, hidden_size, n_outputs = reader.unpack(_HEADER.format)
    if magic != MAGIC:
        raise ModelFormatError("{}: not a model file".format(path))
    if version != FORMAT_VERSION:
        raise ModelFormatError("{}: unsupported model format version {}".format(path, version))
    if n_layers < 1:
        raise ModelFormatError("{}: model has no layers".format(path))
    dropout_rates = np.frombuffer(reader.take(8 * n_layers), dtype="<f8").tolist()

    (n_tensors,) = reader.unpack("<I")
    tensors = {}
    for _ in range(n_tensors):
        (name_length,) = reader.unpack("<H")
        name = reader.take(name_length).decode("utf-8")
        rows, cols = reader.unpack("<II")
        values = np.frombuffer(reader.take(8 * rows * cols), dtype="<f8").astype(np.float64)
        tensors[name] = values.reshape(rows, cols)
    if not reader.exhausted:
        raise ModelFormatError("{}: trailing bytes after the last tensor".format(path))

    def tensor(name, shape):
        if name not in tensors:
            raise ModelFormatError("{}: missing tensor {}".format(path, name))
        value = tensors[name]
        if value.size != int(np.prod(shape)):
            raise ModelFormatError("{}: tensor {} has {} values, expected shape {}".format(
                path, name, value.size, shape))
        return value.reshape(shape).copy()

    layers = []
    input_size = n_channels
    for idx in range(n_layers):
        weights = {}
        for gate in GATES:
            weights["W_" + gate] = tensor("layer{}.W_{}".format(idx, gate), (hidden_size, hidden_size + input_size))
            weights["b_" + gate] = tensor("layer{}.b_{}".format(idx, gate), (hidden_size,))
        layers.append(LstmLayerParams(**weights))
        input_size = hidden_size
    return DeepLstmModel(layers=layers, dropout_rates=dropout_rates,
                         head_W=tensor("head.W", (n_outputs, hidden_size)),
                         head_b=tensor("head.b", (n_outputs,)))
