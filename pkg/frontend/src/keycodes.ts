/**
 * Map KeyboardEvent.code values onto the legacy 0-255 numeric key codes the
 * canonical format uses. Keys without a legacy code return null and are
 * dropped by the session (counted, so the page can surface it).
 */

const TABLE: Record<string, number> = {
  Backspace: 8,
  Tab: 9,
  Enter: 13,
  NumpadEnter: 13,
  ShiftLeft: 16,
  ShiftRight: 16,
  ControlLeft: 17,
  ControlRight: 17,
  AltLeft: 18,
  AltRight: 18,
  Pause: 19,
  CapsLock: 20,
  Escape: 27,
  Space: 32,
  PageUp: 33,
  PageDown: 34,
  End: 35,
  Home: 36,
  ArrowLeft: 37,
  ArrowUp: 38,
  ArrowRight: 39,
  ArrowDown: 40,
  Insert: 45,
  Delete: 46,
  MetaLeft: 91,
  MetaRight: 92,
  Semicolon: 186,
  Equal: 187,
  Comma: 188,
  Minus: 189,
  Period: 190,
  Slash: 191,
  Backquote: 192,
  BracketLeft: 219,
  Backslash: 220,
  BracketRight: 221,
  Quote: 222,
}

export function legacyKeycode(code: string): number | null {
  if (code in TABLE) return TABLE[code]
  if (/^Key[A-Z]$/.test(code)) return code.charCodeAt(3)
  if (/^Digit[0-9]$/.test(code)) return 48 + Number(code[5])
  if (/^Numpad[0-9]$/.test(code)) return 96 + Number(code[6])
  if (/^F([1-9]|1[0-2])$/.test(code)) return 111 + Number(code.slice(1))
  return null
}

/** Codes that insert a visible character (soft-minimum counting). */
export function isPrintable(code: string): boolean {
  return (
    /^(Key[A-Z]|Digit[0-9]|Numpad[0-9])$/.test(code) ||
    code === 'Space' ||
    ['Semicolon', 'Equal', 'Comma', 'Minus', 'Period', 'Slash', 'Backquote',
      'BracketLeft', 'Backslash', 'BracketRight', 'Quote'].includes(code)
  )
}
