"""SHA-256 digests of output files and whole output directories."""
import hashlib
import os

BLOCK_SIZE = 65536


def iter_blocks(path, blocksize=BLOCK_SIZE):
    with open(path, 'rb') as f:
        block = f.read(blocksize)
        while block:
            yield block
            block = f.read(blocksize)


def digest_blocks(blocks) -> str:
    hasher = hashlib.sha256()
    for block in blocks:
        hasher.update(block)
    return hasher.hexdigest()


def hash_of_file(path) -> str:
    """Hex sha256 of the file contents."""
    return digest_blocks(iter_blocks(path))


def _tree_entries(root):
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            path = os.path.join(dirpath, name)
            relative = os.path.relpath(path, root).replace(os.sep, "/")
            yield relative.encode("utf-8") + b"\0" + hash_of_file(path).encode("ascii") + b"\n"


def hash_of_tree(root) -> str:
    """Hex sha256 over every file below ``root`` and its relative path, walked in sorted order.

    Two trees hash equal exactly when they hold byte-identical files under the
    same names.
    """
    if not os.path.isdir(root):
        raise NotADirectoryError("not a directory: {}".format(root))
    return digest_blocks(_tree_entries(root))
