"""Exception types raised by the verification pipeline.

Every error carries an ``anchor`` string naming the failed check, which the
command-line reports print next to the defect.
"""


class CheckError(Exception):
    anchor = "CheckError"

    def __init__(self, message="", defect=None, **context):
        super().__init__(message)
        self.defect = defect
        self.context = context


class InvalidMatrix(CheckError, ValueError):
    anchor = "InvalidMatrix"


class NotPSD(CheckError):
    anchor = "NotPSD"


class InvalidGenerator(CheckError, ValueError):
    anchor = "InvalidGenerator"


class NotUnital(CheckError):
    anchor = "NotUnital"


class DoesNotPreserveAlgebra(CheckError):
    anchor = "DoesNotPreserveAlgebra"


class InvalidComposition(CheckError, ValueError):
    anchor = "InvalidComposition"


class RepresentationDefect(CheckError):
    anchor = "RepresentationDefect"


class NotInAlgebra(CheckError):
    anchor = "NotInAlgebra"


class NotMinimal(CheckError):
    anchor = "NotMinimal"


class DensityDefect(CheckError):
    anchor = "DensityDefect"


class InvalidTensor(CheckError, ValueError):
    anchor = "InvalidTensor"


class RangeEscape(CheckError):
    anchor = "RangeEscape"


class NotMultiplicative(CheckError):
    anchor = "NotMultiplicative"


class NotInRelativeCommutant(CheckError):
    anchor = "NotInRelativeCommutant"


class DilationDefect(CheckError):
    anchor = "DilationDefect"


class ModelMismatch(CheckError):
    anchor = "ModelMismatch"


class GapExceedsHorizon(CheckError, ValueError):
    anchor = "GapExceedsHorizon"


class NotARefinement(CheckError, ValueError):
    anchor = "NotARefinement"


class IsoDefect(CheckError):
    anchor = "IsoDefect"


class SemigroupDefect(CheckError):
    anchor = "SemigroupDefect"
