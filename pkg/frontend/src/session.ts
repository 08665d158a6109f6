/**
 * Capture-session state machine, independent of the DOM so tests and the
 * scripted simulator can drive it directly.
 *
 * Buffered timestamps are microseconds relative to the session start and
 * never decrease. Nothing is buffered without consent. Export emits the
 * canonical line format:
 *
 *   kdi1 <user> <condition> <keyboard> <context> <dataset> <session>
 *   <timestamp_us> <keycode> <D|U>
 *
 * with keyboard Unknown, context derived from the prompt id (opinion-* /
 * fact-*), and dataset P (new collections follow the proposed-protocol
 * shape). Only completed presses are exported, so down/up counts match per
 * keycode in every blob.
 */

import { isPrintable, legacyKeycode } from './keycodes.js'

export interface BufferedEvent {
  tUs: number
  keycode: number
  action: 0 | 1 // 0 down, 1 up
}

export const SOFT_MIN_CHARS = 300

export interface ExportResult {
  text: string
  warnings: string[]
}

function sanitizeToken(raw: string, fallback: string): string {
  const cleaned = raw.trim().replace(/\s+/g, '-')
  return cleaned.length > 0 ? cleaned : fallback
}

export function contextForPrompt(promptId: string): 'Opinion' | 'Fact' | 'Unknown' {
  if (promptId.toLowerCase().startsWith('opinion')) return 'Opinion'
  if (promptId.toLowerCase().startsWith('fact')) return 'Fact'
  return 'Unknown'
}

let sessionCounter = 0

export class CaptureSession {
  readonly sessionId: string
  readonly promptId: string
  readonly userLabel: string
  readonly startMs: number
  readonly consent: boolean

  private events: BufferedEvent[] = []
  private lastUs = 0
  private openDowns = new Map<number, number>()
  private printableDowns = 0
  private stopped = false

  /** Keys seen but not representable in the 0-255 code space. */
  droppedKeys = 0
  /** Releases without a matching press (key held across session start). */
  orphanReleases = 0

  constructor(
    promptId: string,
    userLabel: string,
    consent: boolean,
    startMs: number,
    sessionId?: string,
  ) {
    this.promptId = promptId
    this.userLabel = userLabel
    this.consent = consent
    this.startMs = startMs
    sessionCounter += 1
    this.sessionId = sessionId ?? `s${startMs.toString(36)}x${sessionCounter.toString(36)}`
  }

  get eventCount(): number {
    return this.events.length
  }

  get charCount(): number {
    return this.printableDowns
  }

  get isStopped(): boolean {
    return this.stopped
  }

  private relativeUs(timeMs: number): number {
    const us = Math.round((timeMs - this.startMs) * 1000)
    // Clamp backwards clock jitter; relative timestamps never decrease.
    const t = Math.max(0, us, this.lastUs)
    this.lastUs = t
    return t
  }

  recordDown(code: string, timeMs: number): void {
    if (!this.consent || this.stopped) return
    const keycode = legacyKeycode(code)
    if (keycode === null) {
      this.droppedKeys += 1
      return
    }
    this.events.push({ tUs: this.relativeUs(timeMs), keycode, action: 0 })
    this.openDowns.set(keycode, (this.openDowns.get(keycode) ?? 0) + 1)
    if (isPrintable(code)) this.printableDowns += 1
  }

  recordUp(code: string, timeMs: number): void {
    if (!this.consent || this.stopped) return
    const keycode = legacyKeycode(code)
    if (keycode === null) {
      this.droppedKeys += 1
      return
    }
    const open = this.openDowns.get(keycode) ?? 0
    if (open <= 0) {
      this.orphanReleases += 1
      return
    }
    this.openDowns.set(keycode, open - 1)
    this.events.push({ tUs: this.relativeUs(timeMs), keycode, action: 1 })
  }

  stop(): void {
    this.stopped = true
  }

  /** Buffered events with any still-open presses trimmed away, so every
   * exported down has its up. */
  completedEvents(): BufferedEvent[] {
    const pending = new Map<number, number>(this.openDowns)
    const keep: BufferedEvent[] = []
    for (let i = this.events.length - 1; i >= 0; i -= 1) {
      const e = this.events[i]
      if (e.action === 0) {
        const open = pending.get(e.keycode) ?? 0
        if (open > 0) {
          pending.set(e.keycode, open - 1)
          continue // incomplete press: drop its down
        }
      }
      keep.push(e)
    }
    keep.reverse()
    return keep
  }
}

export function exportSession(session: CaptureSession, conditionLabel: 0 | 1): ExportResult {
  if (!session.isStopped) {
    throw new Error('stop the session before exporting')
  }
  const events = session.completedEvents()
  if (events.length === 0) {
    throw new Error('nothing captured; export refused')
  }
  const warnings: string[] = []
  if (session.charCount < SOFT_MIN_CHARS) {
    warnings.push(
      `response has ${session.charCount} characters, below the suggested minimum of ${SOFT_MIN_CHARS}`,
    )
  }
  if (session.droppedKeys > 0) {
    warnings.push(`${session.droppedKeys} key event(s) had no legacy code and were dropped`)
  }
  const user = sanitizeToken(session.userLabel, 'anon')
  const header = [
    'kdi1',
    user,
    String(conditionLabel),
    'Unknown',
    contextForPrompt(session.promptId),
    'P',
    session.sessionId,
  ].join(' ')
  const lines = [header]
  for (const e of events) {
    lines.push(`${e.tUs} ${e.keycode} ${e.action === 0 ? 'D' : 'U'}`)
  }
  return { text: lines.join('\n') + '\n', warnings }
}
