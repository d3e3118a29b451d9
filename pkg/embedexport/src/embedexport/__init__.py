"""embedexport: standalone embedding exporter for petition corpora.

Reads the four-column petition corpus (text, label, split, name), runs a
pretrained transformer encoder in inference mode, mean-pools the final
hidden states per document, and writes the line-oriented embedding file
consumed by the ranking pipeline. Communicates with that pipeline only
through these two file formats.
"""

__version__ = "0.1.0"
