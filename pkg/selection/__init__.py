from selection.config import SelectionConfig
from selection.returns import critic_free_return, critic_free_returns, hstep_return, hstep_returns
from selection.select import SelectionBatch, SelectionDump, optimality_filter, relevant_windows, select
from selection.windows import Window, WindowSet, all_windows, windows_at
